"""Image preprocessing and pluggable embedding backends.

The reference backend needs no neural runtime: it partitions the 224x224
image into a 16x16 grid and emits, per cell, the mean R/G/B (scaled to
[0,1]) plus a luminance-gradient term, in row-major cell order, truncated
to the requested dimension. It is deterministic down to the bit, which is
what makes the whole pipeline testable offline. Trained models plug in as
TorchScript files behind the same interface.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from shelltriage import kernels
from shelltriage.errors import (
    DecodeFailure,
    DimensionMismatchError,
    IoFailure,
    ModelLoadFailure,
    NonFiniteEmbeddingError,
    UnsupportedFormatError,
)

TARGET_SIZE = 224
GRID = 16
MAX_REFERENCE_DIM = GRID * GRID * 4  # 1024
DEFAULT_DIM = 1000

_ALLOWED_FORMATS = ("PNG", "JPEG")


@dataclass(frozen=True)
class EmbedderSpec:
    """Which backend to use and the embedding dimension it must produce."""

    kind: str = "reference"  # "reference" | "external"
    dim: int = DEFAULT_DIM
    model_path: str | Path | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("reference", "external"):
            raise ValueError(f"unknown embedder kind: {self.kind}")
        if self.dim < 1:
            raise ValueError("embedding dim must be >= 1")
        if self.kind == "reference" and self.dim > MAX_REFERENCE_DIM:
            raise ValueError(
                f"reference backend supports dim <= {MAX_REFERENCE_DIM}, got {self.dim}"
            )
        if self.kind == "external" and self.model_path is None:
            raise ValueError("external embedder requires model_path")


def decode_image(raw: bytes) -> np.ndarray:
    """Decode PNG/JPEG bytes to an HxWx3 uint8 RGB array."""
    try:
        img = Image.open(io.BytesIO(raw))
        fmt = img.format
        if fmt not in _ALLOWED_FORMATS:
            raise UnsupportedFormatError(f"unsupported image format: {fmt}")
        arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except UnsupportedFormatError:
        raise
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeFailure(f"cannot decode image: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DecodeFailure(f"decoded image has bad shape {arr.shape}")
    return arr


def preprocess_image(raw: bytes, spec: EmbedderSpec | None = None) -> np.ndarray:
    """Decode and bilinear-resize to the 224x224x3 uint8 input tensor."""
    arr = decode_image(raw)
    return kernels.resize_bilinear_u8(arr, TARGET_SIZE, TARGET_SIZE)


def _check_vector(values: np.ndarray, dim: int) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64).reshape(-1)
    if vec.shape[0] != dim:
        raise DimensionMismatchError(
            f"backend produced {vec.shape[0]} values, spec.dim is {dim}"
        )
    if not np.all(np.isfinite(vec)):
        raise NonFiniteEmbeddingError("embedding contains NaN or Inf")
    return vec


class ReferenceEmbedder:
    """Deterministic grid-statistics embedder (no model file needed)."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if not 1 <= dim <= MAX_REFERENCE_DIM:
            raise ValueError(f"dim must be in [1, {MAX_REFERENCE_DIM}]")
        self.dim = dim

    def embed(self, tensor: np.ndarray) -> np.ndarray:
        feats = kernels.grid_features_u8(np.ascontiguousarray(tensor), GRID)
        return _check_vector(feats[: self.dim], self.dim)


class ExternalModelEmbedder:
    """TorchScript model backend: 1x3x224x224 float input, 1xdim output.

    If the output still has spatial axes it is global-average-pooled. A
    sidecar `<model_path>.json` may declare channel normalization:
    {"mean": [r,g,b], "std": [r,g,b]} applied after scaling to [0,1].
    """

    def __init__(self, model_path: str | Path, dim: int = DEFAULT_DIM):
        self.dim = dim
        self.model_path = Path(model_path)
        try:
            import torch
        except ImportError as exc:
            raise ModelLoadFailure(
                "external embedder requires torch (install the 'models' extra)"
            ) from exc
        self._torch = torch
        if not self.model_path.exists():
            raise ModelLoadFailure(f"model file not found: {self.model_path}")
        try:
            self._model = torch.jit.load(str(self.model_path), map_location="cpu")
            self._model.eval()
        except Exception as exc:
            raise ModelLoadFailure(f"cannot load model {self.model_path}: {exc}") from exc
        self._mean, self._std = self._load_sidecar()

    def _load_sidecar(self) -> tuple[np.ndarray | None, np.ndarray | None]:
        sidecar = Path(str(self.model_path) + ".json")
        if not sidecar.exists():
            return None, None
        try:
            cfg = json.loads(sidecar.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ModelLoadFailure(f"bad sidecar config {sidecar}: {exc}") from exc
        mean = np.asarray(cfg["mean"], dtype=np.float32) if "mean" in cfg else None
        std = np.asarray(cfg["std"], dtype=np.float32) if "std" in cfg else None
        return mean, std

    def embed(self, tensor: np.ndarray) -> np.ndarray:
        torch = self._torch
        x = tensor.astype(np.float32) / 255.0
        if self._mean is not None:
            x = x - self._mean
        if self._std is not None:
            x = x / self._std
        batch = torch.from_numpy(np.ascontiguousarray(x.transpose(2, 0, 1))[None, ...])
        with torch.no_grad():
            out = self._model(batch)
        arr = out.detach().cpu().numpy()
        if arr.ndim == 4:  # feature map -> global average pool
            arr = arr.mean(axis=(2, 3))
        return _check_vector(arr, self.dim)


def build_embedder(spec: EmbedderSpec):
    if spec.kind == "reference":
        return ReferenceEmbedder(dim=spec.dim)
    return ExternalModelEmbedder(spec.model_path, dim=spec.dim)


def embed(tensor: np.ndarray, spec: EmbedderSpec) -> np.ndarray:
    """One-shot embed; build an embedder once instead when calling in a loop."""
    return build_embedder(spec).embed(tensor)


def write_embeddings_jsonl(
    entries: list[dict], path: str | Path
) -> None:
    """Write embedding interchange lines: {"record_id": ..., "values": [...]}.

    Extra keys on an entry (e.g. coast, category) pass through untouched.
    """
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in entries:
                doc = dict(entry)
                doc["values"] = [float(v) for v in doc["values"]]
                fh.write(json.dumps(doc) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write embeddings to {path}: {exc}") from exc


def read_embeddings_jsonl(path: str | Path) -> list[dict]:
    entries: list[dict] = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise IoFailure(f"{path}:{lineno}: invalid JSON: {exc}") from exc
                if "record_id" not in obj or "values" not in obj:
                    raise IoFailure(f"{path}:{lineno}: need record_id and values")
                obj["values"] = np.asarray(obj["values"], dtype=np.float64)
                entries.append(obj)
    except OSError as exc:
        raise IoFailure(f"cannot read embeddings from {path}: {exc}") from exc
    return entries
