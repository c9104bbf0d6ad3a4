import json
from pathlib import Path

import numpy as np
import pytest

from corroboration.model import FormatSet
from corroboration.rules import Report, ReportPool, RuleTable

# lines collected by the acceptance suite, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def study_formats():
    return FormatSet.from_params([1, 1, 1, 1], [2, 1.5, 1, 0.5], [1, 2.2, 5.4, 13.7])


def dyadic_instance(rng, n_max=8, r_max=3, denom=16):
    """Random instance whose credibilities and costs are exact binary fractions."""
    n = int(rng.integers(1, n_max + 1))
    r = int(rng.integers(1, r_max + 1))
    costs = rng.integers(1, 17, size=r) / 4
    deltas = np.arange(r + 1, 1, -1, dtype=float)
    values = rng.integers(0, denom + 1, size=(n, r)) / denom
    formats = FormatSet.from_params([1.0] * r, deltas, costs)
    return values, formats


DATA = Path(__file__).resolve().parent.parent / "data"


def example_rule_table():
    return RuleTable.from_json(json.loads((DATA / "rules_table.json").read_text()))


def example_pool():
    """Ten close text reports, one low-video, one high-video, three high-video out of range."""
    reports = [Report(i, 0, 2.0 * i + 1) for i in range(10)]
    reports += [Report(10, 1, 80.0), Report(11, 2, 130.0)]
    reports += [Report(12 + i, 2, 180.0) for i in range(3)]
    return ReportPool(tuple(reports))
