"""Session fixtures plus a terminal reporter that prints one PASS/FAIL line
per acceptance criterion (tests tagged with the `criterion` marker)."""

from __future__ import annotations

import pytest

from support import make_planted_context

CRITERIA_ORDER = [
    "kNN oracle equivalence",
    "gate decision rule",
    "calibration zero false negatives",
    "split correctness",
    "stats reproduction",
    "metrics",
    "end-to-end pipeline",
    "index persistence",
    "service latency and contract",
]

_RESULTS: dict[str, bool] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): ties a test to a named acceptance criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    if report.when == "call":
        passed = report.passed
    elif report.failed:  # setup/teardown error counts as a failure
        passed = False
    else:
        return
    _RESULTS[name] = _RESULTS.get(name, True) and passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in CRITERIA_ORDER:
        if name in _RESULTS:
            verdict = "PASS" if _RESULTS[name] else "FAIL"
            terminalreporter.write_line(f"[{verdict}] {name}")
    for name in sorted(set(_RESULTS) - set(CRITERIA_ORDER)):
        verdict = "PASS" if _RESULTS[name] else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {name}")


@pytest.fixture(scope="session")
def planted():
    """(PipelineContext, golden query images) against the 10-entry index."""
    return make_planted_context()
