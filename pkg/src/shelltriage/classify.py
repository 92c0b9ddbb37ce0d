"""Binary coast classification behind a pluggable backend.

The reference backend is nearest-centroid over the vector index: score each
coast by cosine similarity between the query embedding and the coast's mean
vector, then turn the two scores into a confidence with a temperature
softmax. A trained model plugs in as a TorchScript file emitting two logits
ordered [Caribbean, Pacific].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from shelltriage.errors import MissingClassError, ModelLoadFailure
from shelltriage.index import VectorIndex, cosine

COAST_CARIBBEAN = "Caribbean"
COAST_PACIFIC = "Pacific"
LABEL_ORDER = (COAST_CARIBBEAN, COAST_PACIFIC)


@dataclass(frozen=True)
class CoastPrediction:
    label: str
    confidence: float
    raw_scores: dict[str, float]  # keys "caribbean", "pacific"


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "centroid"  # "centroid" | "external"
    temperature: float = 1.0
    model_path: str | Path | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("centroid", "external"):
            raise ValueError(f"unknown classifier kind: {self.kind}")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be > 0")
        if self.kind == "external" and self.model_path is None:
            raise ValueError("external classifier requires model_path")


def class_centroids(index: VectorIndex) -> dict[str, np.ndarray]:
    """Arithmetic mean vector per coast, keyed 'caribbean'/'pacific'."""
    out: dict[str, np.ndarray] = {}
    mat = np.asarray(index.vectors, dtype=np.float64)
    coasts = np.asarray(index.coasts)
    for coast in LABEL_ORDER:
        mask = coasts == coast
        if not mask.any():
            raise MissingClassError(f"index has no {coast} entries")
        out[coast.lower()] = mat[mask].mean(axis=0)
    return out


def softmax_pair(s_car: float, s_pac: float, temperature: float) -> tuple[float, float]:
    m = max(s_car, s_pac)
    ec = math.exp((s_car - m) / temperature)
    ep = math.exp((s_pac - m) / temperature)
    z = ec + ep
    return ec / z, ep / z


def prediction_from_scores(
    s_car: float, s_pac: float, temperature: float
) -> CoastPrediction:
    p_car, p_pac = softmax_pair(s_car, s_pac, temperature)
    # exact tie resolves to Caribbean (alphabetical), confidence 0.5
    if s_car >= s_pac:
        label, confidence = COAST_CARIBBEAN, p_car
    else:
        label, confidence = COAST_PACIFIC, p_pac
    return CoastPrediction(
        label=label,
        confidence=confidence,
        raw_scores={"caribbean": s_car, "pacific": s_pac},
    )


class NearestCentroidClassifier:
    consumes = "embedding"

    def __init__(self, centroids: dict[str, np.ndarray], temperature: float = 1.0):
        for key in ("caribbean", "pacific"):
            if key not in centroids:
                raise MissingClassError(f"missing centroid for '{key}'")
        self.centroids = {k: np.asarray(v, dtype=np.float64) for k, v in centroids.items()}
        self.temperature = temperature

    @classmethod
    def from_index(cls, index: VectorIndex, temperature: float = 1.0):
        return cls(class_centroids(index), temperature=temperature)

    def predict(self, embedding: np.ndarray) -> CoastPrediction:
        s_car = cosine(embedding, self.centroids["caribbean"])
        s_pac = cosine(embedding, self.centroids["pacific"])
        return prediction_from_scores(s_car, s_pac, self.temperature)


class ExternalModelClassifier:
    """TorchScript classifier emitting two logits ordered [Caribbean, Pacific].

    The sidecar `<model_path>.json` declares what the model consumes:
    {"input": "image"} (1x3x224x224, values in [0,1], optional mean/std) or
    {"input": "embedding"} (1xdim). Default is "image".
    """

    def __init__(self, model_path: str | Path, temperature: float = 1.0):
        self.temperature = temperature
        self.model_path = Path(model_path)
        try:
            import torch
        except ImportError as exc:
            raise ModelLoadFailure(
                "external classifier requires torch (install the 'models' extra)"
            ) from exc
        self._torch = torch
        if not self.model_path.exists():
            raise ModelLoadFailure(f"model file not found: {self.model_path}")
        try:
            self._model = torch.jit.load(str(self.model_path), map_location="cpu")
            self._model.eval()
        except Exception as exc:
            raise ModelLoadFailure(f"cannot load model {self.model_path}: {exc}") from exc
        self.consumes = "image"
        self._mean = self._std = None
        sidecar = Path(str(self.model_path) + ".json")
        if sidecar.exists():
            try:
                cfg = json.loads(sidecar.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ModelLoadFailure(f"bad sidecar config {sidecar}: {exc}") from exc
            self.consumes = cfg.get("input", "image")
            if self.consumes not in ("image", "embedding"):
                raise ModelLoadFailure(f"sidecar input must be image|embedding")
            if "mean" in cfg:
                self._mean = np.asarray(cfg["mean"], dtype=np.float32)
            if "std" in cfg:
                self._std = np.asarray(cfg["std"], dtype=np.float32)

    def _logits(self, batch) -> tuple[float, float]:
        torch = self._torch
        with torch.no_grad():
            out = self._model(batch)
        arr = out.detach().cpu().numpy().reshape(-1)
        if arr.shape[0] != 2:
            raise ModelLoadFailure(f"classifier produced {arr.shape[0]} logits, need 2")
        return float(arr[0]), float(arr[1])

    def predict(self, embedding: np.ndarray) -> CoastPrediction:
        torch = self._torch
        x = np.asarray(embedding, dtype=np.float32).reshape(1, -1)
        s_car, s_pac = self._logits(torch.from_numpy(x))
        return prediction_from_scores(s_car, s_pac, self.temperature)

    def predict_image(self, tensor: np.ndarray) -> CoastPrediction:
        torch = self._torch
        x = tensor.astype(np.float32) / 255.0
        if self._mean is not None:
            x = x - self._mean
        if self._std is not None:
            x = x / self._std
        batch = torch.from_numpy(np.ascontiguousarray(x.transpose(2, 0, 1))[None, ...])
        s_car, s_pac = self._logits(batch)
        return prediction_from_scores(s_car, s_pac, self.temperature)


def build_classifier(spec: ClassifierSpec, index: VectorIndex | None = None):
    if spec.kind == "centroid":
        if index is None:
            raise MissingClassError("centroid classifier needs a vector index")
        return NearestCentroidClassifier.from_index(index, temperature=spec.temperature)
    return ExternalModelClassifier(spec.model_path, temperature=spec.temperature)


def classify(query: np.ndarray, spec: ClassifierSpec, backend) -> CoastPrediction:
    """One-shot classify with a prebuilt backend (centroids object or model)."""
    if isinstance(backend, dict):
        backend = NearestCentroidClassifier(backend, temperature=spec.temperature)
    return backend.predict(query)
