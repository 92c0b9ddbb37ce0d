"""End-to-end triage flow: decode, embed once, gate, classify."""

from __future__ import annotations

import uuid

import numpy as np
import pytest

from shelltriage.pipeline import (
    PIPELINE_VERSION,
    PipelineContext,
    StageTimings,
    TriageVerdict,
    batch_triage,
    triage,
)

from support import checkerboard, png_bytes

WIRE_BASE_KEYS = {
    "request_id",
    "status",
    "score",
    "lambda",
    "k",
    "timings_ms",
    "pipeline_version",
}
TIMING_KEYS = {"decode", "embed", "gate", "classify", "total"}


class CountingEmbedder:
    """Delegates to a real embedder while counting embed() calls."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0
        self.dim = inner.dim

    def embed(self, tensor):
        self.calls += 1
        return self.inner.embed(tensor)


class TestGoldenImages:
    def test_pacific_image_valid_and_pacific(self, planted):
        ctx, images = planted
        verdict = triage(images["pacific"], ctx, request_id="req-pac")
        assert verdict.status == "valid"
        assert verdict.gate.score >= ctx.gate_cfg.threshold
        assert verdict.prediction.label == "Pacific"
        assert verdict.prediction.confidence > 0.5

    def test_caribbean_image_valid_and_caribbean(self, planted):
        ctx, images = planted
        verdict = triage(images["caribbean"], ctx, request_id="req-car")
        assert verdict.status == "valid"
        assert verdict.prediction.label == "Caribbean"

    def test_checkerboard_is_anomaly_without_label(self, planted):
        ctx, images = planted
        verdict = triage(images["ood"], ctx, request_id="req-ood")
        assert verdict.status == "anomaly"
        assert verdict.gate.score < ctx.gate_cfg.threshold
        assert verdict.prediction is None
        wire = verdict.to_wire()
        assert "label" not in wire and "confidence" not in wire


class TestWireSchema:
    def test_valid_verdict_keys(self, planted):
        ctx, images = planted
        wire = triage(images["pacific"], ctx, request_id="w1").to_wire()
        assert set(wire) == WIRE_BASE_KEYS | {"label", "confidence"}
        assert set(wire["timings_ms"]) == TIMING_KEYS
        assert wire["lambda"] == ctx.gate_cfg.threshold
        assert wire["k"] == ctx.gate_cfg.k
        assert wire["pipeline_version"] == PIPELINE_VERSION
        assert wire["request_id"] == "w1"

    def test_anomaly_verdict_keys(self, planted):
        ctx, images = planted
        wire = triage(images["ood"], ctx, request_id="w2").to_wire()
        assert set(wire) == WIRE_BASE_KEYS

    def test_error_verdict_keys(self, planted):
        ctx, _ = planted
        wire = triage(b"definitely not an image", ctx, request_id="w3").to_wire()
        assert set(wire) == WIRE_BASE_KEYS | {"error"}
        assert wire["status"] == "error"
        assert wire["score"] is None
        assert wire["request_id"] == "w3"

    def test_timings_populated_and_consistent(self, planted):
        ctx, images = planted
        verdict = triage(images["pacific"], ctx)
        t = verdict.timings
        parts = t.decode_ms + t.embed_ms + t.gate_ms + t.classify_ms
        assert t.total_ms > 0.0
        assert t.total_ms == pytest.approx(parts, rel=0.05, abs=1.0)


class TestRequestIds:
    def test_error_preserves_request_id(self, planted):
        ctx, _ = planted
        verdict = triage(b"\x00\x01", ctx, request_id="keep-me")
        assert verdict.request_id == "keep-me"
        assert verdict.status == "error"

    def test_default_is_a_uuid(self, planted):
        ctx, images = planted
        verdict = triage(images["pacific"], ctx)
        uuid.UUID(verdict.request_id)  # raises if not parseable


class TestStageErrors:
    def test_zero_norm_embedding_becomes_error_verdict(self, planted):
        # a flat black image embeds to the zero vector, which cosine cannot
        # score; that must be an error verdict, not an exception
        ctx, _ = planted
        flat = png_bytes(np.zeros((1, 1, 3), dtype=np.uint8))
        verdict = triage(flat, ctx, request_id="flat.png")
        assert verdict.status == "error"
        assert verdict.request_id == "flat.png"
        assert verdict.gate is None
        assert "zero norm" in (verdict.error or "")
        assert verdict.to_wire()["score"] is None


class TestEmbedOnce:
    def test_embed_called_exactly_once_per_image(self, planted):
        ctx, images = planted
        counting = CountingEmbedder(ctx.embedder)
        probe = PipelineContext(
            embedder=counting,
            index=ctx.index,
            gate_cfg=ctx.gate_cfg,
            classifier=ctx.classifier,
        )
        triage(images["pacific"], probe)
        assert counting.calls == 1
        triage(images["ood"], probe)
        assert counting.calls == 2


class TestBatch:
    def test_order_preserved_with_mixed_outcomes(self, planted):
        ctx, images = planted
        batch = [images["pacific"], b"junk", images["ood"], images["caribbean"]]
        ids = ["a", "b", "c", "d"]
        verdicts = batch_triage(batch, ctx, request_ids=ids)
        assert [v.request_id for v in verdicts] == ids
        assert [v.status for v in verdicts] == ["valid", "error", "anomaly", "valid"]

    def test_parallel_equals_serial(self, planted):
        ctx, images = planted
        batch = [images["pacific"], images["caribbean"], images["ood"]] * 2
        ids = [f"r{i}" for i in range(len(batch))]
        serial = batch_triage(batch, ctx, parallelism=1, request_ids=ids)
        parallel = batch_triage(batch, ctx, parallelism=4, request_ids=ids)
        for s, p in zip(serial, parallel):
            assert s.request_id == p.request_id
            assert s.status == p.status
            if s.gate is not None:
                assert s.gate.score == p.gate.score
            if s.prediction is not None:
                assert s.prediction.label == p.prediction.label
                assert s.prediction.confidence == p.prediction.confidence

    def test_argument_validation(self, planted):
        ctx, images = planted
        with pytest.raises(ValueError):
            batch_triage([images["pacific"]], ctx, parallelism=0)
        with pytest.raises(ValueError):
            batch_triage([images["pacific"]], ctx, request_ids=["a", "b"])

    def test_batch_generates_ids_when_missing(self, planted):
        ctx, images = planted
        verdicts = batch_triage([images["pacific"], images["ood"]], ctx)
        assert len({v.request_id for v in verdicts}) == 2


class TestStatusProperty:
    def test_error_status_wins(self):
        verdict = TriageVerdict(
            request_id="x",
            threshold=0.955,
            k=5,
            pipeline_version=PIPELINE_VERSION,
            error="boom",
            timings=StageTimings(),
        )
        assert verdict.status == "error"


class TestImageConsumingClassifier:
    def test_tensor_routed_to_predict_image(self, planted):
        ctx, images = planted

        class TensorTap:
            consumes = "image"

            def __init__(self):
                self.shapes = []

            def predict_image(self, tensor):
                self.shapes.append(tensor.shape)
                return ctx.classifier.predict(ctx.embedder.embed(tensor))

        tap = TensorTap()
        probe = PipelineContext(
            embedder=ctx.embedder,
            index=ctx.index,
            gate_cfg=ctx.gate_cfg,
            classifier=tap,
        )
        verdict = triage(images["pacific"], probe)
        assert verdict.status == "valid"
        assert tap.shapes == [(224, 224, 3)]

    def test_anomaly_never_reaches_classifier(self, planted):
        ctx, _ = planted

        class Exploder:
            consumes = "embedding"

            def predict(self, embedding):
                raise AssertionError("classifier must not run on anomalies")

        probe = PipelineContext(
            embedder=ctx.embedder,
            index=ctx.index,
            gate_cfg=ctx.gate_cfg,
            classifier=Exploder(),
        )
        verdict = triage(png_bytes(checkerboard()), probe)
        assert verdict.status == "anomaly"
