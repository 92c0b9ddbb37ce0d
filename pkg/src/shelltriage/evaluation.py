"""Classification and gate evaluation: confusion matrix, P/R/F1, rejection table.

Per-class metrics use the standard definitions with class order
[Caribbean, Pacific]; "accuracy" per class is its recall, and balanced
accuracy is the mean of per-class recalls. Aggregates are emitted twice,
tagged "macro" and "weighted" (support-weighted), because the two differ
and neither is canonical. Display values are rounded half-up to 2 decimals;
internal values keep full precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

from shelltriage.errors import EmptyInputError, NoInDomainCategoryError
from shelltriage.gate import DECISION_ANOMALY, GateVerdict

LABELS = ("Caribbean", "Pacific")


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: tuple[tuple[int, int], tuple[int, int]]  # rows true, cols predicted
    labels: tuple[str, str] = LABELS

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)


@dataclass(frozen=True)
class ClassMetrics:
    accuracy: float  # == recall, in percent
    precision: float
    recall: float
    f1: float
    precision_defined: bool = True
    recall_defined: bool = True


@dataclass(frozen=True)
class MetricsReport:
    per_class: dict[str, ClassMetrics]
    balanced_accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float


@dataclass(frozen=True)
class AnomalyEvalReport:
    table: dict[str, tuple[int, int]]  # category -> (below threshold, total)
    in_domain_category: str
    ood_rejected: int
    ood_total: int
    ood_rejection_rate: float
    in_domain_false_negatives: int
    in_domain_total: int


def confusion(pairs: Sequence[tuple[str, str]]) -> ConfusionMatrix:
    """Count (true, predicted) coast pairs into a 2x2 matrix."""
    if not pairs:
        raise EmptyInputError("no (true, predicted) pairs to count")
    pos = {label: i for i, label in enumerate(LABELS)}
    counts = [[0, 0], [0, 0]]
    for true, pred in pairs:
        if true not in pos or pred not in pos:
            raise ValueError(f"labels must be in {LABELS}: ({true}, {pred})")
        counts[pos[true]][pos[pred]] += 1
    return ConfusionMatrix(counts=(tuple(counts[0]), tuple(counts[1])))


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    n = len(cm.labels)
    row_sums = [sum(cm.counts[i]) for i in range(n)]
    col_sums = [sum(cm.counts[i][j] for i in range(n)) for j in range(n)]
    per_class: dict[str, ClassMetrics] = {}
    for i, label in enumerate(cm.labels):
        tp = cm.counts[i][i]
        recall_defined = row_sums[i] > 0
        precision_defined = col_sums[i] > 0
        recall = (tp / row_sums[i] * 100.0) if recall_defined else 0.0
        precision = (tp / col_sums[i] * 100.0) if precision_defined else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if (precision + recall) > 0
            else 0.0
        )
        per_class[label] = ClassMetrics(
            accuracy=recall,
            precision=precision,
            recall=recall,
            f1=f1,
            precision_defined=precision_defined,
            recall_defined=recall_defined,
        )
    values = list(per_class.values())
    total = sum(row_sums)
    weights = [row_sums[i] / total for i in range(n)] if total else [0.0] * n
    return MetricsReport(
        per_class=per_class,
        balanced_accuracy=sum(v.recall for v in values) / n,
        macro_precision=sum(v.precision for v in values) / n,
        macro_recall=sum(v.recall for v in values) / n,
        macro_f1=sum(v.f1 for v in values) / n,
        weighted_precision=sum(w * v.precision for w, v in zip(weights, values)),
        weighted_recall=sum(w * v.recall for w, v in zip(weights, values)),
        weighted_f1=sum(w * v.f1 for w, v in zip(weights, values)),
    )


def anomaly_eval(
    verdicts: Sequence[tuple[str, GateVerdict]], in_domain_category: str
) -> AnomalyEvalReport:
    """Per-category rejection counts plus headline OOD/in-domain rates."""
    categories: dict[str, list[GateVerdict]] = {}
    for category, verdict in verdicts:
        categories.setdefault(category, []).append(verdict)
    if in_domain_category not in categories:
        raise NoInDomainCategoryError(
            f"no verdicts for in-domain category '{in_domain_category}'"
        )
    table: dict[str, tuple[int, int]] = {}
    for category, vs in categories.items():
        below = sum(1 for v in vs if v.decision == DECISION_ANOMALY)
        table[category] = (below, len(vs))
    ood_rejected = sum(
        below for cat, (below, _) in table.items() if cat != in_domain_category
    )
    ood_total = sum(
        total for cat, (_, total) in table.items() if cat != in_domain_category
    )
    fn, in_total = table[in_domain_category]
    return AnomalyEvalReport(
        table=table,
        in_domain_category=in_domain_category,
        ood_rejected=ood_rejected,
        ood_total=ood_total,
        ood_rejection_rate=ood_rejected / ood_total if ood_total else 0.0,
        in_domain_false_negatives=fn,
        in_domain_total=in_total,
    )


def round2(value: float) -> float:
    return float(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def _metrics_doc(report: MetricsReport, cm: ConfusionMatrix | None) -> dict:
    doc: dict = {
        "per_class": {
            label: {
                "accuracy": m.accuracy,
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "precision_defined": m.precision_defined,
                "recall_defined": m.recall_defined,
            }
            for label, m in report.per_class.items()
        },
        "overall": [
            {
                "aggregation": "macro",
                "balanced_accuracy": report.balanced_accuracy,
                "precision": report.macro_precision,
                "recall": report.macro_recall,
                "f1": report.macro_f1,
            },
            {
                "aggregation": "weighted",
                "balanced_accuracy": report.balanced_accuracy,
                "precision": report.weighted_precision,
                "recall": report.weighted_recall,
                "f1": report.weighted_f1,
            },
        ],
    }
    if cm is not None:
        doc["confusion"] = {
            "labels": list(cm.labels),
            "counts": [list(row) for row in cm.counts],
        }
    return doc


def _anomaly_doc(report: AnomalyEvalReport) -> dict:
    return {
        "per_category": {
            cat: {"below_threshold": below, "total": total}
            for cat, (below, total) in sorted(report.table.items())
        },
        "in_domain_category": report.in_domain_category,
        "headline": f"{report.ood_rejected}/{report.ood_total}",
        "ood_rejected": report.ood_rejected,
        "ood_total": report.ood_total,
        "ood_rejection_rate": report.ood_rejection_rate,
        "in_domain_false_negatives": report.in_domain_false_negatives,
        "in_domain_total": report.in_domain_total,
    }


def _metrics_markdown(report: MetricsReport) -> list[str]:
    lines = [
        "| Ecosystem | Accuracy (%) | Precision (%) | Recall (%) | F1 (%) |",
        "| --- | --- | --- | --- | --- |",
    ]
    for label in reversed(LABELS):  # Pacific row first, matching report layout
        m = report.per_class[label]
        lines.append(
            f"| {label} | {round2(m.accuracy):.2f} | {round2(m.precision):.2f} "
            f"| {round2(m.recall):.2f} | {round2(m.f1):.2f} |"
        )
    lines.append(
        f"| Overall (macro) | {round2(report.balanced_accuracy):.2f} "
        f"| {round2(report.macro_precision):.2f} | {round2(report.macro_recall):.2f} "
        f"| {round2(report.macro_f1):.2f} |"
    )
    lines.append(
        f"| Overall (weighted) | {round2(report.balanced_accuracy):.2f} "
        f"| {round2(report.weighted_precision):.2f} | {round2(report.weighted_recall):.2f} "
        f"| {round2(report.weighted_f1):.2f} |"
    )
    return lines


def _anomaly_markdown(report: AnomalyEvalReport) -> list[str]:
    lines = [
        "| Category | Images Below Threshold |",
        "| --- | --- |",
    ]
    for cat in sorted(report.table):
        below, total = report.table[cat]
        lines.append(f"| {cat} | {below}/{total} |")
    lines.append("")
    lines.append(f"OOD rejected: {report.ood_rejected}/{report.ood_total}")
    lines.append(
        f"In-domain false negatives: "
        f"{report.in_domain_false_negatives}/{report.in_domain_total}"
    )
    return lines


def emit_report(
    metrics_report: MetricsReport | None = None,
    cm: ConfusionMatrix | None = None,
    anomaly_report: AnomalyEvalReport | None = None,
    fmt: str = "json",
) -> bytes:
    """Serialize available reports as JSON (lossless) or a Markdown table."""
    if fmt == "json":
        doc: dict = {}
        if metrics_report is not None:
            doc["classification"] = _metrics_doc(metrics_report, cm)
        if anomaly_report is not None:
            doc["anomaly"] = _anomaly_doc(anomaly_report)
        return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")
    if fmt == "md":
        sections: list[str] = []
        if metrics_report is not None:
            sections.append("## Classification")
            sections.extend(_metrics_markdown(metrics_report))
            sections.append("")
        if anomaly_report is not None:
            sections.append("## Anomaly rejection")
            sections.extend(_anomaly_markdown(anomaly_report))
            sections.append("")
        return ("\n".join(sections)).encode("utf-8")
    raise ValueError(f"unknown report format: {fmt}")
