"""Dataset manifest ingestion, stratified splitting, and composition stats.

A manifest is a flat table of labeled image records (coast, family, genus,
species, shell class). Splitting is deterministic: per stratum, largest-
remainder apportionment of the ratios with tie priority Train > Val > Test,
and a keyed-hash shuffle so the same (manifest, seed) always yields the
same assignment regardless of record order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from collections import defaultdict
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from shelltriage.errors import (
    BadRatiosError,
    DimensionMismatchError,
    DuplicateIdError,
    EmptyManifestError,
    IoFailure,
    MissingEmbeddingError,
    MissingFieldError,
    UnknownCoastError,
    UnknownShellClassError,
)

COASTS = ("Caribbean", "Pacific")
SHELL_CLASSES = ("Gastropod", "Bivalve")
SPLITS = ("Train", "Val", "Test")
DEFAULT_RATIOS = (0.70, 0.15, 0.15)

MANIFEST_FIELDS = (
    "record_id",
    "image_path",
    "coast",
    "family",
    "genus",
    "species",
    "shell_class",
)
_REQUIRED_NONEMPTY = ("record_id", "image_path", "coast", "family", "species")


@dataclass(frozen=True)
class ManifestRecord:
    record_id: str
    image_path: str
    coast: str
    family: str
    genus: str
    species: str
    shell_class: str


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ManifestRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def by_id(self) -> dict[str, ManifestRecord]:
        return {r.record_id: r for r in self.records}

    def families(self) -> list[str]:
        return sorted({r.family for r in self.records})

    def species(self) -> list[str]:
        return sorted({r.species for r in self.records})


@dataclass(frozen=True)
class SplitAssignment:
    record_id: str
    split: str


@dataclass(frozen=True)
class CoastStats:
    species_count: int
    image_count: int
    gastropod_species: int
    bivalve_species: int
    avg_images_per_species: float


@dataclass(frozen=True)
class DatasetStats:
    per_coast: dict[str, CoastStats]


def _validate_record(row: Mapping[str, object], where: str) -> ManifestRecord:
    values: dict[str, str] = {}
    for field in MANIFEST_FIELDS:
        raw = row.get(field)
        if raw is None:
            raise MissingFieldError(f"{where}: missing field '{field}'")
        values[field] = str(raw)
    for field in _REQUIRED_NONEMPTY:
        if not values[field].strip():
            raise MissingFieldError(f"{where}: empty required field '{field}'")
    if values["coast"] not in COASTS:
        raise UnknownCoastError(f"{where}: unknown coast '{values['coast']}'")
    if values["shell_class"] not in SHELL_CLASSES:
        raise UnknownShellClassError(
            f"{where}: unknown shell_class '{values['shell_class']}'"
        )
    return ManifestRecord(**values)


def parse_manifest(path: str | Path, fmt: str | None = None) -> DatasetManifest:
    """Read a CSV or JSONL manifest; `fmt` defaults to the file extension."""
    path = Path(path)
    if fmt is None:
        fmt = "jsonl" if path.suffix.lower() in (".jsonl", ".ndjson") else "csv"
    fmt = fmt.lower()
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unsupported manifest format: {fmt}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read manifest {path}: {exc}") from exc

    records: list[ManifestRecord] = []
    seen: set[str] = set()
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise MissingFieldError(f"{path}: empty file, no header") from None
        if tuple(header) != MANIFEST_FIELDS:
            raise MissingFieldError(
                f"{path}: bad header {header!r}, expected {','.join(MANIFEST_FIELDS)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_FIELDS):
                raise MissingFieldError(
                    f"{path}:{lineno}: expected {len(MANIFEST_FIELDS)} fields, got {len(row)}"
                )
            records.append(
                _validate_record(dict(zip(MANIFEST_FIELDS, row)), f"{path}:{lineno}")
            )
    else:
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IoFailure(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise IoFailure(f"{path}:{lineno}: expected a JSON object")
            records.append(_validate_record(obj, f"{path}:{lineno}"))

    if not records:
        raise EmptyManifestError(f"{path}: manifest has no records")
    for rec in records:
        if rec.record_id in seen:
            raise DuplicateIdError(f"duplicate record_id '{rec.record_id}'")
        seen.add(rec.record_id)
    return DatasetManifest(records=tuple(records))


def _as_fractions(ratios: Sequence[float]) -> tuple[Fraction, ...]:
    fracs = tuple(Fraction(r).limit_denominator(10**9) for r in ratios)
    if len(fracs) != 3 or any(f < 0 for f in fracs) or sum(fracs) != 1:
        raise BadRatiosError(f"ratios must be 3 non-negative values summing to 1: {ratios}")
    return fracs


def _apportion(n: int, fracs: Sequence[Fraction]) -> list[int]:
    # largest remainder; ties broken by position (Train > Val > Test)
    quotas = [f * n for f in fracs]
    counts = [int(q) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    leftover = n - sum(counts)
    order = sorted(range(len(fracs)), key=lambda i: (-remainders[i], i))
    for i in range(leftover):
        counts[order[i]] += 1
    return counts


def _shuffle_key(seed: int, stratum: str, record_id: str) -> bytes:
    payload = f"{seed}\x1f{stratum}\x1f{record_id}".encode("utf-8")
    return hashlib.blake2b(payload, digest_size=16).digest()


def stratified_split(
    manifest: DatasetManifest,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    seed: int = 0,
    stratify_by: str = "family",
) -> list[SplitAssignment]:
    """Assign every record to Train/Val/Test, stratified per family.

    Within each stratum, records are ordered by a blake2b hash keyed on
    (seed, stratum, record_id) and the apportioned counts are taken in that
    order, so the output is a pure function of (manifest, ratios, seed).
    """
    if not manifest.records:
        raise EmptyManifestError("manifest has no records")
    if stratify_by not in ("family", "species"):
        raise ValueError(f"stratify_by must be 'family' or 'species': {stratify_by}")
    fracs = _as_fractions(ratios)

    strata: dict[str, list[ManifestRecord]] = defaultdict(list)
    for rec in manifest.records:
        strata[getattr(rec, stratify_by)].append(rec)

    assigned: dict[str, str] = {}
    for stratum in sorted(strata):
        members = strata[stratum]
        members.sort(key=lambda r: (_shuffle_key(seed, stratum, r.record_id), r.record_id))
        n_train, n_val, _ = _apportion(len(members), fracs)
        for idx, rec in enumerate(members):
            if idx < n_train:
                assigned[rec.record_id] = "Train"
            elif idx < n_train + n_val:
                assigned[rec.record_id] = "Val"
            else:
                assigned[rec.record_id] = "Test"
    return [SplitAssignment(r.record_id, assigned[r.record_id]) for r in manifest.records]


def write_splits_csv(assignments: Iterable[SplitAssignment], path: str | Path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["record_id", "split"])
            for a in assignments:
                writer.writerow([a.record_id, a.split])
    except OSError as exc:
        raise IoFailure(f"cannot write splits to {path}: {exc}") from exc


def _round_half_up_1(value: float) -> float:
    return float(Decimal(repr(value)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def compute_stats(manifest: DatasetManifest) -> DatasetStats:
    """Per-coast species/image counts and average images per species.

    The average is rounded half-up to one decimal; a species is counted as
    gastropod or bivalve by the shell class of its first record on that coast.
    """
    per_coast: dict[str, CoastStats] = {}
    for coast in COASTS:
        recs = [r for r in manifest.records if r.coast == coast]
        species_class: dict[str, str] = {}
        for r in recs:
            species_class.setdefault(r.species, r.shell_class)
        species_count = len(species_class)
        image_count = len(recs)
        gastropods = sum(1 for c in species_class.values() if c == "Gastropod")
        bivalves = species_count - gastropods
        avg = _round_half_up_1(image_count / species_count) if species_count else 0.0
        per_coast[coast] = CoastStats(
            species_count=species_count,
            image_count=image_count,
            gastropod_species=gastropods,
            bivalve_species=bivalves,
            avg_images_per_species=avg,
        )
    return DatasetStats(per_coast=per_coast)


def stats_to_json(stats: DatasetStats) -> str:
    doc = {
        coast: {
            "species_count": s.species_count,
            "image_count": s.image_count,
            "gastropod_species": s.gastropod_species,
            "bivalve_species": s.bivalve_species,
            "avg_images_per_species": s.avg_images_per_species,
        }
        for coast, s in sorted(stats.per_coast.items())
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def species_mean_embeddings(
    manifest: DatasetManifest, embeddings: Mapping[str, np.ndarray]
) -> dict[str, np.ndarray]:
    """Arithmetic mean embedding per species; all vectors must share a dim."""
    dim: int | None = None
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = defaultdict(int)
    for rec in manifest.records:
        vec = embeddings.get(rec.record_id)
        if vec is None:
            raise MissingEmbeddingError(f"no embedding for record '{rec.record_id}'")
        vec = np.asarray(vec, dtype=np.float64)
        if vec.ndim != 1:
            raise DimensionMismatchError(
                f"embedding for '{rec.record_id}' is not a vector"
            )
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise DimensionMismatchError(
                f"embedding for '{rec.record_id}' has dim {vec.shape[0]}, expected {dim}"
            )
        if rec.species in sums:
            sums[rec.species] = sums[rec.species] + vec
        else:
            sums[rec.species] = vec.copy()
        counts[rec.species] += 1
    return {sp: sums[sp] / counts[sp] for sp in sums}
