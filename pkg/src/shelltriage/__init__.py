"""Two-stage seashell provenance triage.

Stage one gates out images that do not look like reference seashells
(mean cosine similarity to the k nearest index vectors against a threshold);
stage two assigns passing images a Pacific or Caribbean coast label with a
confidence. Exposed as a library, a CLI (`shelltriage`), and a FastAPI
service.
"""

__version__ = "0.1.0"
