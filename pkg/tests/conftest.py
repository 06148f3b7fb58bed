"""Prints one PASS/FAIL line per acceptance criterion at the end of the session."""

import re

import pytest

CRITERIA = {
    1: "conjugacy against the simplex-grid oracle",
    2: "gradient and subgradient checks",
    3: "binary equivalence with the minimax hinge",
    4: "duality on the tiny instances",
    5: "solver correctness",
    6: "randomized decision-rule certificates",
    7: "separable clusters (MEM label mode and SVM)",
    8: "synthetic protocol n=200 d=2000 runs=20",
    9: "feature selection on the planted instance",
    10: "determinism",
}

_outcomes: dict[int, str] = {}
DETAILS: dict[int, str] = {}


@pytest.fixture
def detail(request):
    """Record a one-line measurement for the criterion under test."""
    m = re.match(r"test_criterion_(\d+)_", request.node.name)
    key = int(m.group(1)) if m else None

    def put(text):
        if key is not None:
            DETAILS[key] = text
            print(f"criterion {key}: {text}")

    return put


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)_", report.nodeid)
    if not m:
        return
    key = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if report.outcome == "failed" or _outcomes.get(key) == "FAIL":
            _outcomes[key] = "FAIL"
        elif report.outcome == "passed":
            _outcomes[key] = "PASS"
        else:
            _outcomes.setdefault(key, report.outcome.upper())


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA):
        status = _outcomes.get(key, "NOT RUN")
        extra = f" :: {DETAILS[key]}" if key in DETAILS else ""
        terminalreporter.write_line(f"{status:<7} criterion {key:>2}  {CRITERIA[key]}{extra}")
