"""Anomaly gate: mean cosine similarity to the k nearest reference vectors.

A query scores S = mean of its top-k cosine similarities against the index;
it passes the gate iff S >= threshold (the boundary itself is valid). The
threshold can be calibrated from score samples so that no in-domain sample
is rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import ceil
from typing import Mapping, Sequence

import numpy as np

from shelltriage.errors import EmptyInDomainError, EmptyIndexError
from shelltriage.index import Neighbor, VectorIndex, top_k

DECISION_VALID = "Valid"
DECISION_ANOMALY = "Anomaly"

DEFAULT_THRESHOLD = 0.955
DEFAULT_K = 5


@dataclass(frozen=True)
class GateConfig:
    threshold: float = DEFAULT_THRESHOLD  # serialized as "lambda"
    k: int = DEFAULT_K

    def __post_init__(self) -> None:
        if not (-1.0 < self.threshold <= 1.0):
            raise ValueError(f"threshold must be in (-1, 1]: {self.threshold}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1: {self.k}")


@dataclass(frozen=True)
class GateVerdict:
    score: float
    decision: str
    neighbors: tuple[Neighbor, ...]
    k_clamped: bool = False


@dataclass(frozen=True)
class CalibrationReport:
    lambda_star: float
    in_domain_scores: tuple[float, ...]
    ood_scores: tuple[float, ...]
    false_negatives: int
    rejection_rate: float


def anomaly_score(
    index: VectorIndex, query: np.ndarray, k: int
) -> tuple[float, list[Neighbor]]:
    """Mean cosine similarity to the k nearest index entries.

    k larger than the index is clamped (detectable as len(neighbors) < k).
    """
    if len(index) == 0:
        raise EmptyIndexError("cannot score against an empty index")
    if k < 1:
        raise ValueError("k must be >= 1")
    neighbors = top_k(index, query, min(k, len(index)))
    score = float(np.mean([n.similarity for n in neighbors]))
    return score, neighbors


def decide(score: float, cfg: GateConfig) -> str:
    return DECISION_VALID if score >= cfg.threshold else DECISION_ANOMALY


def gate_query(index: VectorIndex, query: np.ndarray, cfg: GateConfig) -> GateVerdict:
    score, neighbors = anomaly_score(index, query, cfg.k)
    return GateVerdict(
        score=score,
        decision=decide(score, cfg),
        neighbors=tuple(neighbors),
        k_clamped=len(neighbors) < cfg.k,
    )


def calibrate(
    in_domain: Sequence[float],
    ood: Sequence[float] = (),
    percentile: float | None = None,
) -> CalibrationReport:
    """Pick the largest threshold that rejects no in-domain sample.

    With the >= decision rule that threshold is min(in_domain). The optional
    `percentile` (0..100) instead takes the nearest-rank percentile of the
    in-domain scores, trading some in-domain recall for outlier robustness.
    """
    if len(in_domain) == 0:
        raise EmptyInDomainError("calibration needs at least one in-domain score")
    scores = sorted(float(s) for s in in_domain)
    if percentile is None:
        lambda_star = scores[0]
    else:
        if not 0.0 < percentile <= 100.0:
            raise ValueError(f"percentile must be in (0, 100]: {percentile}")
        rank = max(1, ceil(percentile / 100.0 * len(scores)))
        lambda_star = scores[rank - 1]
    false_negatives = sum(1 for s in scores if s < lambda_star)
    ood_scores = tuple(float(s) for s in ood)
    rejected = sum(1 for s in ood_scores if s < lambda_star)
    rejection_rate = rejected / len(ood_scores) if ood_scores else 0.0
    return CalibrationReport(
        lambda_star=lambda_star,
        in_domain_scores=tuple(scores),
        ood_scores=ood_scores,
        false_negatives=false_negatives,
        rejection_rate=rejection_rate,
    )


def rejection_table(
    per_category_scores: Mapping[str, Sequence[float]], cfg: GateConfig
) -> dict[str, tuple[int, int]]:
    """Per category: (count of scores below threshold, total)."""
    table: dict[str, tuple[int, int]] = {}
    for category, scores in per_category_scores.items():
        below = sum(1 for s in scores if s < cfg.threshold)
        table[category] = (below, len(scores))
    return table


def calibration_report_json(
    report: CalibrationReport,
    per_category: Mapping[str, tuple[int, int]] | None = None,
) -> str:
    doc = {
        "lambda_star": report.lambda_star,
        "n_in": len(report.in_domain_scores),
        "n_ood": len(report.ood_scores),
        "false_negatives": report.false_negatives,
        "rejection_rate": report.rejection_rate,
        "per_category": {
            cat: {"below_threshold": below, "total": total}
            for cat, (below, total) in sorted((per_category or {}).items())
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True)
