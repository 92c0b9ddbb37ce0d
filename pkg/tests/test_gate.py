"""Anomaly scoring, the threshold decision rule, and calibration."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shelltriage.errors import EmptyInDomainError, EmptyIndexError
from shelltriage.gate import (
    DECISION_ANOMALY,
    DECISION_VALID,
    DEFAULT_K,
    DEFAULT_THRESHOLD,
    GateConfig,
    anomaly_score,
    calibrate,
    calibration_report_json,
    decide,
    gate_query,
    rejection_table,
)
from shelltriage.index import VectorIndex, build_index

from support import (
    IN_DOMAIN_CATEGORY,
    IN_DOMAIN_COUNT,
    PLANTED_REJECTION_COUNTS,
    REAL_REJECTION_ROWS,
    planted_category_scores,
    query_with_cosine,
    unit_direction_index,
)


class TestAnomalyScore:
    def test_hand_case_mean_of_top_two(self):
        e0 = [1.0, 0.0]
        e1 = [0.0, 1.0]
        diag = [math.sqrt(0.5), math.sqrt(0.5)]
        index = build_index(
            [("a", "Pacific", e0), ("b", "Pacific", e1), ("c", "Caribbean", diag)]
        )
        score, neighbors = anomaly_score(index, np.array(e0), 2)
        # nearest two: a (cos 1.0) and c (cos sqrt(.5))
        assert [n.record_id for n in neighbors] == ["a", "c"]
        assert score == pytest.approx((1.0 + math.sqrt(0.5)) / 2.0, abs=1e-12)

    def test_score_equals_cosine_on_degenerate_index(self):
        index = unit_direction_index()
        for t in (0.5, 0.90, 0.955, 0.97, 1.0):
            for k in (1, 3, 5):
                score, _ = anomaly_score(index, query_with_cosine(t), k)
                assert score == pytest.approx(t, abs=1e-12)

    def test_k_clamped_to_index_size(self):
        index = unit_direction_index(n_pacific=2, n_caribbean=1)
        score, neighbors = anomaly_score(index, query_with_cosine(0.8), 99)
        assert len(neighbors) == 3
        assert score == pytest.approx(0.8, abs=1e-12)

    def test_invalid_inputs(self):
        index = unit_direction_index()
        with pytest.raises(ValueError):
            anomaly_score(index, query_with_cosine(0.9), 0)
        empty = VectorIndex(ids=(), coasts=(), vectors=np.zeros((0, 8), np.float32))
        with pytest.raises(EmptyIndexError):
            anomaly_score(empty, query_with_cosine(0.9), 1)


class TestDecide:
    def test_defaults(self):
        assert DEFAULT_THRESHOLD == 0.955
        assert DEFAULT_K == 5
        cfg = GateConfig()
        assert cfg.threshold == 0.955
        assert cfg.k == 5

    def test_boundary_is_inclusive(self):
        cfg = GateConfig()
        assert decide(0.955, cfg) == DECISION_VALID
        assert decide(np.nextafter(0.955, 0.0), cfg) == DECISION_ANOMALY
        assert decide(1.0, cfg) == DECISION_VALID
        assert decide(-0.2, cfg) == DECISION_ANOMALY

    @settings(max_examples=200, deadline=None)
    @given(
        score=st.floats(min_value=-1.0, max_value=1.0),
        threshold=st.floats(min_value=-0.999, max_value=1.0),
    )
    def test_rule_is_exactly_geq(self, score: float, threshold: float):
        cfg = GateConfig(threshold=threshold)
        want = DECISION_VALID if score >= threshold else DECISION_ANOMALY
        assert decide(score, cfg) == want

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GateConfig(threshold=-1.0)
        with pytest.raises(ValueError):
            GateConfig(threshold=1.0000001)
        with pytest.raises(ValueError):
            GateConfig(k=0)
        GateConfig(threshold=1.0, k=1)  # legal edge


class TestGateQuery:
    def test_valid_and_anomaly_paths(self):
        index = unit_direction_index()
        cfg = GateConfig()
        valid = gate_query(index, query_with_cosine(0.97), cfg)
        assert valid.decision == DECISION_VALID
        assert valid.score == pytest.approx(0.97, abs=1e-12)
        assert not valid.k_clamped
        rejected = gate_query(index, query_with_cosine(0.90), cfg)
        assert rejected.decision == DECISION_ANOMALY

    def test_threshold_exactly_at_observed_score_is_valid(self):
        index = unit_direction_index()
        score, _ = anomaly_score(index, query_with_cosine(0.93), DEFAULT_K)
        verdict = gate_query(index, query_with_cosine(0.93), GateConfig(threshold=score))
        assert verdict.decision == DECISION_VALID
        assert verdict.score == score

    def test_k_clamped_flag(self):
        index = unit_direction_index(n_pacific=2, n_caribbean=2)
        verdict = gate_query(index, query_with_cosine(0.99), GateConfig(k=9))
        assert verdict.k_clamped
        assert len(verdict.neighbors) == 4


class TestCalibrate:
    def test_lambda_star_is_min(self):
        report = calibrate([0.97, 0.96, 0.99])
        assert report.lambda_star == 0.96
        assert report.false_negatives == 0
        assert report.in_domain_scores == (0.96, 0.97, 0.99)

    @settings(max_examples=50, deadline=None)
    @given(
        scores=st.lists(
            st.floats(min_value=-1.0, max_value=1.0), min_size=1, max_size=60
        )
    )
    def test_zero_false_negatives_always(self, scores: list[float]):
        report = calibrate(scores)
        assert report.false_negatives == 0
        assert all(s >= report.lambda_star for s in scores)

    def test_percentile_nearest_rank_hand_case(self):
        scores = [0.98, 0.90, 0.96, 0.92]  # sorted: .90 .92 .96 .98
        assert calibrate(scores, percentile=50).lambda_star == 0.92
        assert calibrate(scores, percentile=100).lambda_star == 0.98
        assert calibrate(scores, percentile=1).lambda_star == 0.90
        assert calibrate(scores, percentile=75).lambda_star == 0.96

    def test_percentile_range_checked(self):
        with pytest.raises(ValueError):
            calibrate([0.9], percentile=0.0)
        with pytest.raises(ValueError):
            calibrate([0.9], percentile=100.5)

    def test_empty_in_domain_rejected(self):
        with pytest.raises(EmptyInDomainError):
            calibrate([])

    def test_ood_rejection_is_strictly_below(self):
        report = calibrate([0.96], ood=[0.90, 0.96, 0.97])
        assert report.lambda_star == 0.96
        # only 0.90 is strictly below the threshold
        assert report.rejection_rate == pytest.approx(1.0 / 3.0)

    def test_no_ood_means_zero_rate(self):
        assert calibrate([0.95]).rejection_rate == 0.0


class TestRejectionTable:
    def test_planted_counts_recovered(self):
        table = rejection_table(planted_category_scores(), GateConfig())
        for cat, want in PLANTED_REJECTION_COUNTS.items():
            assert table[cat] == want
        assert table[IN_DOMAIN_CATEGORY] == (0, IN_DOMAIN_COUNT)
        ood = [v for c, v in table.items() if c != IN_DOMAIN_CATEGORY]
        assert sum(b for b, _ in ood) == 168
        assert sum(t for _, t in ood) == 180

    def test_published_rows_realizable(self):
        scores = {
            cat: [0.90] * below + [0.97] * (total - below)
            for cat, (below, total) in REAL_REJECTION_ROWS.items()
        }
        table = rejection_table(scores, GateConfig())
        assert table == REAL_REJECTION_ROWS
        assert sum(b for b, _ in table.values()) == 167
        assert sum(t for _, t in table.values()) == 190

    def test_at_threshold_not_counted_below(self):
        table = rejection_table({"Edge": [0.955, 0.9549]}, GateConfig())
        assert table["Edge"] == (1, 2)


class TestReportJson:
    def test_document_shape(self):
        report = calibrate([0.97, 0.96], ood=[0.90, 0.99])
        doc = json.loads(calibration_report_json(report, {"Cats": (10, 10)}))
        assert doc["lambda_star"] == 0.96
        assert doc["n_in"] == 2
        assert doc["n_ood"] == 2
        assert doc["false_negatives"] == 0
        assert doc["rejection_rate"] == 0.5
        assert doc["per_category"]["Cats"] == {"below_threshold": 10, "total": 10}
