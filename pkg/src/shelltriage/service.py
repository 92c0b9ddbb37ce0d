"""HTTP serving layer: upload endpoint, predict endpoint, health, latency stats.

One deployable exposes both /receive-files and /predict. By default both run
the pipeline locally; setting proxy_predict_url makes /receive-files forward
the decoded payload to a remote /predict over HTTP, reproducing a split
two-service topology without a second code path.

Contract points:
  - Authorization: Bearer <JWT> on everything except /healthz.
  - image_b64 is standard-alphabet Base64 with padding; decoded size capped,
    oversize gets 413 and undecodable input gets 400, both with an
    status:"error" verdict body so every response validates against the
    verdict schema.
  - Latency percentiles use the nearest-rank method over a sliding window.
  - Audit log: one JSONL verdict line per non-401 request, no image bytes.
"""

from __future__ import annotations

import base64
import binascii
import json
import os
import threading
import time
import uuid
from collections import deque
from dataclasses import dataclass
from math import ceil
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool
from starlette.datastructures import UploadFile

from shelltriage.auth import verify_token
from shelltriage.errors import AuthError
from shelltriage.gate import GateConfig
from shelltriage.pipeline import (
    PIPELINE_VERSION,
    PipelineContext,
    StageTimings,
    TriageVerdict,
    triage,
)

MAX_DECODED_BYTES = 10 * 1024 * 1024
WINDOW_SIZE = 10_000
DEFAULT_AUDIT_MAX_BYTES = 64 * 1024 * 1024


class LatencyWindow:
    """Sliding window of per-request total latencies with nearest-rank stats."""

    def __init__(self, size: int = WINDOW_SIZE):
        self._samples: deque[float] = deque(maxlen=size)
        self._lock = threading.Lock()

    def record(self, total_ms: float) -> None:
        with self._lock:
            self._samples.append(total_ms)

    def stats(self) -> dict:
        with self._lock:
            ordered = sorted(self._samples)
        n = len(ordered)
        if n == 0:
            return {"count": 0, "p50": None, "p95": None, "p99": None}

        def nearest_rank(p: float) -> float:
            return ordered[max(0, ceil(p * n) - 1)]

        return {
            "count": n,
            "p50": nearest_rank(0.50),
            "p95": nearest_rank(0.95),
            "p99": nearest_rank(0.99),
        }


class AuditLog:
    """Append-only JSONL of verdicts; rotates to <name>.1 at the size cap."""

    def __init__(self, path: Path, max_bytes: int = DEFAULT_AUDIT_MAX_BYTES):
        if max_bytes <= 0:
            raise ValueError("max_bytes must be positive")
        self._path = Path(path)
        self._max_bytes = max_bytes
        self._lock = threading.Lock()
        self._path.parent.mkdir(parents=True, exist_ok=True)

    @property
    def path(self) -> Path:
        return self._path

    def append(self, doc: dict) -> None:
        line = json.dumps(doc, sort_keys=True) + "\n"
        encoded = line.encode("utf-8")
        with self._lock:
            try:
                size = self._path.stat().st_size
            except FileNotFoundError:
                size = 0
            if size > 0 and size + len(encoded) > self._max_bytes:
                os.replace(self._path, self._path.with_name(self._path.name + ".1"))
            with open(self._path, "ab") as fh:
                fh.write(encoded)


@dataclass
class ServiceConfig:
    secret: bytes
    audit_path: Path | None = None
    audit_max_bytes: int = DEFAULT_AUDIT_MAX_BYTES
    window_size: int = WINDOW_SIZE
    max_decoded_bytes: int = MAX_DECODED_BYTES
    proxy_predict_url: str | None = None
    expected_issuer: str | None = None
    cors_origins: tuple[str, ...] = ("*",)


class _Reject(Exception):
    """Pre-pipeline rejection that still yields an error verdict body."""

    def __init__(self, http_status: int, message: str, request_id: str):
        super().__init__(message)
        self.http_status = http_status
        self.message = message
        self.request_id = request_id


def _decode_b64_field(image_b64: str, request_id: str, limit: int) -> bytes:
    # 3/4 length bound rejects oversize bodies before decoding them.
    if len(image_b64) // 4 * 3 > limit + 3:
        raise _Reject(413, "decoded payload would exceed the size limit", request_id)
    try:
        raw = base64.b64decode(image_b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise _Reject(400, f"image_b64 is not valid base64: {exc}", request_id) from exc
    if len(raw) > limit:
        raise _Reject(413, "decoded payload exceeds the size limit", request_id)
    return raw


async def _extract_payload(
    request: Request, allow_multipart: bool, limit: int
) -> tuple[str, bytes]:
    """Pull (request_id, image bytes) out of a JSON or multipart body."""
    content_type = request.headers.get("content-type", "")
    if allow_multipart and content_type.startswith("multipart/form-data"):
        form = await request.form()
        rid = form.get("request_id")
        rid = rid if isinstance(rid, str) and rid else str(uuid.uuid4())
        upload = next(
            (value for value in form.values() if isinstance(value, UploadFile)), None
        )
        if upload is None:
            raise _Reject(400, "multipart body contains no file part", rid)
        raw = await upload.read()
        if len(raw) > limit:
            raise _Reject(413, "uploaded file exceeds the size limit", rid)
        return rid, raw

    try:
        body = await request.json()
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise _Reject(400, "request body is not valid JSON", str(uuid.uuid4())) from exc
    if not isinstance(body, dict):
        raise _Reject(400, "request body must be a JSON object", str(uuid.uuid4()))
    rid = body.get("request_id")
    rid = rid if isinstance(rid, str) and rid else str(uuid.uuid4())
    image_b64 = body.get("image_b64")
    if not isinstance(image_b64, str):
        raise _Reject(400, "image_b64 field missing or not a string", rid)
    return rid, _decode_b64_field(image_b64, rid, limit)


def create_app(ctx: PipelineContext | None, config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="shelltriage", version=PIPELINE_VERSION)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(config.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    window = LatencyWindow(config.window_size)
    audit = (
        AuditLog(config.audit_path, config.audit_max_bytes)
        if config.audit_path is not None
        else None
    )
    app.state.ctx = ctx
    app.state.window = window
    app.state.audit = audit
    gate_cfg = ctx.gate_cfg if ctx is not None else GateConfig()
    version = ctx.version if ctx is not None else PIPELINE_VERSION

    def authorized(request: Request) -> bool:
        header = request.headers.get("authorization", "")
        if not header.startswith("Bearer "):
            return False
        try:
            verify_token(
                config.secret, header[len("Bearer ") :], config.expected_issuer
            )
            return True
        except AuthError:
            return False

    def finish(verdict_doc: dict, http_status: int, t0: float) -> JSONResponse:
        window.record((time.perf_counter() - t0) * 1000.0)
        if audit is not None:
            audit.append(verdict_doc)
        return JSONResponse(verdict_doc, status_code=http_status)

    def rejection_verdict(reject: _Reject, t0: float) -> dict:
        verdict = TriageVerdict(
            request_id=reject.request_id,
            threshold=gate_cfg.threshold,
            k=gate_cfg.k,
            pipeline_version=version,
            error=reject.message,
            timings=StageTimings(total_ms=(time.perf_counter() - t0) * 1000.0),
        )
        return verdict.to_wire()

    async def handle(request: Request, allow_multipart: bool, proxy: bool) -> JSONResponse:
        if not authorized(request):
            return JSONResponse({"detail": "missing or invalid token"}, status_code=401)
        t0 = time.perf_counter()
        try:
            rid, raw = await _extract_payload(
                request, allow_multipart, config.max_decoded_bytes
            )
        except _Reject as reject:
            return finish(rejection_verdict(reject, t0), reject.http_status, t0)

        if proxy and config.proxy_predict_url is not None:
            import httpx

            payload = {
                "request_id": rid,
                "image_b64": base64.b64encode(raw).decode("ascii"),
            }
            headers = {"Authorization": request.headers.get("authorization", "")}
            async with httpx.AsyncClient() as client:
                remote = await client.post(
                    config.proxy_predict_url, json=payload, headers=headers
                )
            return finish(remote.json(), remote.status_code, t0)

        if ctx is None:
            return JSONResponse({"detail": "pipeline not ready"}, status_code=503)
        verdict = await run_in_threadpool(triage, raw, ctx, rid)
        doc = verdict.to_wire()
        return finish(doc, 400 if verdict.status == "error" else 200, t0)

    @app.post("/receive-files")
    async def receive_files(request: Request) -> JSONResponse:
        return await handle(request, allow_multipart=True, proxy=True)

    @app.post("/predict")
    async def predict(request: Request) -> JSONResponse:
        return await handle(request, allow_multipart=False, proxy=False)

    @app.get("/healthz")
    async def healthz() -> JSONResponse:
        ready = ctx is not None or config.proxy_predict_url is not None
        return JSONResponse(
            {
                "status": "ok" if ready else "not_ready",
                "index_fingerprint": (
                    ctx.index.fingerprint_hex if ctx is not None else None
                ),
                "pipeline_version": version,
            }
        )

    @app.get("/stats")
    async def stats(request: Request) -> JSONResponse:
        if not authorized(request):
            return JSONResponse({"detail": "missing or invalid token"}, status_code=401)
        return JSONResponse(window.stats())

    return app
