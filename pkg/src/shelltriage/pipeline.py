"""Two-stage triage: gate first, classify only what passes.

An image is decoded and embedded exactly once; the same embedding feeds the
anomaly gate and (by default) the nearest-centroid classifier. External
classifiers that consume raw images get the preprocessed tensor instead.
Bad uploads become status:"error" verdicts rather than exceptions so a
serving loop never dies on user-generated noise.
"""

from __future__ import annotations

import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from shelltriage import kernels
from shelltriage.classify import CoastPrediction
from shelltriage.embedding import TARGET_SIZE, decode_image
from shelltriage.errors import DecodeFailure, ShellTriageError
from shelltriage.gate import DECISION_ANOMALY, GateConfig, GateVerdict, gate_query
from shelltriage.index import VectorIndex

PIPELINE_VERSION = "0.1.0"


@dataclass
class PipelineContext:
    embedder: object  # .embed(tensor) -> vector, .dim
    index: VectorIndex
    gate_cfg: GateConfig
    classifier: object  # .predict(embedding) / .predict_image(tensor), .consumes
    version: str = PIPELINE_VERSION


@dataclass(frozen=True)
class StageTimings:
    decode_ms: float = 0.0
    embed_ms: float = 0.0
    gate_ms: float = 0.0
    classify_ms: float = 0.0
    total_ms: float = 0.0


@dataclass(frozen=True)
class TriageVerdict:
    request_id: str
    threshold: float
    k: int
    pipeline_version: str
    gate: GateVerdict | None = None
    prediction: CoastPrediction | None = None
    error: str | None = None
    timings: StageTimings = field(default_factory=StageTimings)

    @property
    def status(self) -> str:
        if self.error is not None:
            return "error"
        assert self.gate is not None
        return "anomaly" if self.gate.decision == DECISION_ANOMALY else "valid"

    def to_wire(self) -> dict:
        doc: dict = {
            "request_id": self.request_id,
            "status": self.status,
            "score": None if self.gate is None else self.gate.score,
            "lambda": self.threshold,
            "k": self.k,
            "timings_ms": {
                "decode": self.timings.decode_ms,
                "embed": self.timings.embed_ms,
                "gate": self.timings.gate_ms,
                "classify": self.timings.classify_ms,
                "total": self.timings.total_ms,
            },
            "pipeline_version": self.pipeline_version,
        }
        if self.prediction is not None:
            doc["label"] = self.prediction.label
            doc["confidence"] = self.prediction.confidence
        if self.error is not None:
            doc["error"] = self.error
        return doc


def _error_verdict(request_id: str, ctx: PipelineContext, message: str, t0: float) -> TriageVerdict:
    total = (time.perf_counter() - t0) * 1000.0
    return TriageVerdict(
        request_id=request_id,
        threshold=ctx.gate_cfg.threshold,
        k=ctx.gate_cfg.k,
        pipeline_version=ctx.version,
        error=message,
        timings=StageTimings(total_ms=total),
    )


def triage(
    raw_image: bytes, ctx: PipelineContext, request_id: str | None = None
) -> TriageVerdict:
    """Run decode -> embed -> gate -> (classify) and return one verdict."""
    rid = request_id if request_id else str(uuid.uuid4())
    t0 = time.perf_counter()
    try:
        arr = decode_image(raw_image)
        tensor = kernels.resize_bilinear_u8(arr, TARGET_SIZE, TARGET_SIZE)
    except DecodeFailure as exc:
        return _error_verdict(rid, ctx, str(exc), t0)
    t1 = time.perf_counter()

    # degenerate inputs (e.g. a flat image embedding to the zero vector)
    # surface as stage errors; they must become error verdicts, not crashes
    try:
        embedding = ctx.embedder.embed(tensor)
        t2 = time.perf_counter()

        gate_verdict = gate_query(ctx.index, embedding, ctx.gate_cfg)
        t3 = time.perf_counter()

        prediction: CoastPrediction | None = None
        if gate_verdict.decision != DECISION_ANOMALY:
            if getattr(ctx.classifier, "consumes", "embedding") == "image":
                prediction = ctx.classifier.predict_image(tensor)
            else:
                prediction = ctx.classifier.predict(embedding)
    except ShellTriageError as exc:
        return _error_verdict(rid, ctx, str(exc), t0)
    t4 = time.perf_counter()

    return TriageVerdict(
        request_id=rid,
        threshold=ctx.gate_cfg.threshold,
        k=ctx.gate_cfg.k,
        pipeline_version=ctx.version,
        gate=gate_verdict,
        prediction=prediction,
        timings=StageTimings(
            decode_ms=(t1 - t0) * 1000.0,
            embed_ms=(t2 - t1) * 1000.0,
            gate_ms=(t3 - t2) * 1000.0,
            classify_ms=(t4 - t3) * 1000.0,
            total_ms=(t4 - t0) * 1000.0,
        ),
    )


def batch_triage(
    images: Sequence[bytes],
    ctx: PipelineContext,
    parallelism: int = 1,
    request_ids: Sequence[str] | None = None,
) -> list[TriageVerdict]:
    """Triage many images; output order matches input order.

    Per-item failures land in the corresponding verdict, never abort the batch.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    if request_ids is not None and len(request_ids) != len(images):
        raise ValueError("request_ids must match images length")
    ids = list(request_ids) if request_ids is not None else [str(uuid.uuid4()) for _ in images]

    def one(item: tuple[str, bytes]) -> TriageVerdict:
        rid, raw = item
        try:
            return triage(raw, ctx, request_id=rid)
        except ShellTriageError as exc:
            return _error_verdict(rid, ctx, str(exc), time.perf_counter())

    work = list(zip(ids, images))
    if parallelism == 1 or len(work) <= 1:
        return [one(item) for item in work]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, work))
