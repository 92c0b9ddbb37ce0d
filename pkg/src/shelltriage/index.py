"""Exact top-k cosine search over reference embeddings, with binary persistence.

Entries are kept in canonical order (sorted by record_id) so the build
fingerprint and every search result are independent of input order. The
on-disk format is:

    magic "BKHV" | version u32 LE | dim u32 LE | count u64 LE
    | count*dim float32 LE (canonical order) | CRC32 of the vector block u32 LE

plus a sidecar `<path>.meta.jsonl` holding {"record_id", "coast"} per entry
in the same order. Vectors are stored at float32; similarity accumulation
is always double precision.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from shelltriage import kernels
from shelltriage.errors import (
    BadMagicError,
    CorruptPayloadError,
    DimensionMismatchError,
    DuplicateIdError,
    EmptyInputError,
    IoFailure,
    NonFiniteEmbeddingError,
    VersionMismatchError,
    ZeroVectorError,
)

MAGIC = b"BKHV"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")  # magic, version, dim, count


@dataclass(frozen=True)
class Neighbor:
    record_id: str
    similarity: float


class VectorIndex:
    """Immutable-after-build store of (record_id, coast, vector) entries."""

    def __init__(self, ids: Sequence[str], coasts: Sequence[str], vectors: np.ndarray):
        # inputs are assumed canonical and validated; use build_index()/load_index()
        self.ids: tuple[str, ...] = tuple(ids)
        self.coasts: tuple[str, ...] = tuple(coasts)
        self.vectors: np.ndarray = vectors  # float32 [n, dim]
        self.dim: int = int(vectors.shape[1])
        self._mat64 = np.ascontiguousarray(vectors, dtype=np.float64)
        self._norms = np.sqrt(np.einsum("ij,ij->i", self._mat64, self._mat64))
        self._id_pos = {rid: i for i, rid in enumerate(self.ids)}
        self.build_fingerprint: int = self._fingerprint()

    def __len__(self) -> int:
        return len(self.ids)

    def coast_of(self, record_id: str) -> str:
        return self.coasts[self._id_pos[record_id]]

    def vector_of(self, record_id: str) -> np.ndarray:
        return self.vectors[self._id_pos[record_id]]

    def _fingerprint(self) -> int:
        h = hashlib.blake2b(digest_size=8)
        h.update(MAGIC)
        h.update(struct.pack("<IIQ", FORMAT_VERSION, self.dim, len(self.ids)))
        for rid, coast, row in zip(self.ids, self.coasts, self.vectors):
            h.update(rid.encode("utf-8"))
            h.update(b"\x1f")
            h.update(coast.encode("utf-8"))
            h.update(b"\x1f")
            h.update(row.astype("<f4", copy=False).tobytes())
            h.update(b"\x1e")
        return int.from_bytes(h.digest(), "little")

    @property
    def fingerprint_hex(self) -> str:
        return f"{self.build_fingerprint:016x}"


def _as_query(query: np.ndarray, dim: int) -> tuple[np.ndarray, float]:
    q = np.ascontiguousarray(np.asarray(query, dtype=np.float64).reshape(-1))
    if q.shape[0] != dim:
        raise DimensionMismatchError(f"query dim {q.shape[0]} != index dim {dim}")
    if not np.all(np.isfinite(q)):
        raise NonFiniteEmbeddingError("query contains NaN or Inf")
    qnorm = float(np.sqrt(np.dot(q, q)))
    if qnorm == 0.0:
        raise ZeroVectorError("query vector has zero norm")
    return q, qnorm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """cos(a, b) = <a,b> / (|a||b|), accumulated in double precision."""
    av = np.asarray(a, dtype=np.float64).reshape(-1)
    bv = np.asarray(b, dtype=np.float64).reshape(-1)
    if av.shape[0] != bv.shape[0]:
        raise DimensionMismatchError(f"dims differ: {av.shape[0]} vs {bv.shape[0]}")
    na = float(np.sqrt(np.dot(av, av)))
    nb = float(np.sqrt(np.dot(bv, bv)))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine undefined for zero vectors")
    return float(np.dot(av, bv) / (na * nb))


def build_index(items: Iterable[tuple[str, str, np.ndarray]]) -> VectorIndex:
    """Build an index from (record_id, coast, vector) triples."""
    triples = list(items)
    if not triples:
        raise EmptyInputError("cannot build an empty index")
    seen: set[str] = set()
    dim: int | None = None
    for rid, _, vec in triples:
        if rid in seen:
            raise DuplicateIdError(f"duplicate record_id '{rid}'")
        seen.add(rid)
        v = np.asarray(vec, dtype=np.float64).reshape(-1)
        if dim is None:
            dim = v.shape[0]
        elif v.shape[0] != dim:
            raise DimensionMismatchError(
                f"vector for '{rid}' has dim {v.shape[0]}, expected {dim}"
            )
        if not np.all(np.isfinite(v)):
            raise NonFiniteEmbeddingError(f"vector for '{rid}' contains NaN or Inf")
        if not np.any(v):
            raise ZeroVectorError(f"vector for '{rid}' is all zeros")
    triples.sort(key=lambda t: t[0])
    ids = [t[0] for t in triples]
    coasts = [t[1] for t in triples]
    mat = np.ascontiguousarray(
        np.stack([np.asarray(t[2], dtype=np.float64).reshape(-1) for t in triples]).astype(
            np.float32
        )
    )
    return VectorIndex(ids, coasts, mat)


def top_k(index: VectorIndex, query: np.ndarray, k: int) -> list[Neighbor]:
    """Exact k nearest neighbors by cosine, descending; ties by record_id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    q, qnorm = _as_query(query, index.dim)
    sims = kernels.cosine_scores(index._mat64, index._norms, q, qnorm)
    k = min(k, len(index))
    # stable sort on -sims keeps canonical (record_id) order among ties
    order = np.argsort(-sims, kind="stable")[:k]
    return [Neighbor(index.ids[i], float(sims[i])) for i in order]


def save_index(index: VectorIndex, path: str | Path) -> None:
    path = Path(path)
    block = np.ascontiguousarray(index.vectors, dtype="<f4").tobytes()
    crc = zlib.crc32(block) & 0xFFFFFFFF
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, index.dim, len(index)))
            fh.write(block)
            fh.write(struct.pack("<I", crc))
        with open(meta_path(path), "w", encoding="utf-8") as fh:
            for rid, coast in zip(index.ids, index.coasts):
                fh.write(json.dumps({"record_id": rid, "coast": coast}) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write index to {path}: {exc}") from exc


def meta_path(path: str | Path) -> Path:
    return Path(str(path) + ".meta.jsonl")


def load_index(path: str | Path) -> VectorIndex:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read index from {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        if raw[: len(MAGIC)] != MAGIC[: len(raw)]:
            raise BadMagicError(f"{path}: not an index file")
        raise CorruptPayloadError(f"{path}: truncated header")
    magic, version, dim, count = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + count * dim * 4 + 4
    if len(raw) != expected:
        raise CorruptPayloadError(
            f"{path}: expected {expected} bytes for {count}x{dim}, got {len(raw)}"
        )
    block = raw[_HEADER.size : _HEADER.size + count * dim * 4]
    (crc_stored,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(block) & 0xFFFFFFFF != crc_stored:
        raise CorruptPayloadError(f"{path}: vector block checksum mismatch")
    vectors = np.frombuffer(block, dtype="<f4").reshape(count, dim).copy()

    mpath = meta_path(path)
    try:
        meta_lines = mpath.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read index metadata {mpath}: {exc}") from exc
    ids: list[str] = []
    coasts: list[str] = []
    for lineno, line in enumerate(meta_lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            ids.append(str(obj["record_id"]))
            coasts.append(str(obj["coast"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CorruptPayloadError(f"{mpath}:{lineno}: bad metadata line") from exc
    if len(ids) != count:
        raise CorruptPayloadError(
            f"{mpath}: {len(ids)} metadata lines for {count} vectors"
        )
    if any(ids[i] >= ids[i + 1] for i in range(len(ids) - 1)):
        raise CorruptPayloadError(f"{mpath}: entries not in canonical record_id order")
    return VectorIndex(ids, coasts, vectors)
