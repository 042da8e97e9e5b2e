import sys
from pathlib import Path

import numpy as np
import pytest

from featsel.dataset import Dataset

sys.path.insert(0, str(Path(__file__).parent))

# Three fixed 6-point problems: separable, overlapping, and one with a stray point.
SIX_POINT_FIXTURES = {
    "separable": (
        [[0.0, 0.0], [0.5, 1.0], [1.0, 0.2], [3.0, 3.0], [3.5, 2.0], [2.5, 3.5]],
        [0, 0, 0, 1, 1, 1],
    ),
    "overlap": (
        [[0.0, 0.0], [1.0, 1.0], [1.2, 0.8], [0.9, 1.1], [2.0, 2.0], [0.2, 0.1]],
        [0, 0, 1, 1, 1, 1],
    ),
    "stray": (
        [[-1.0, 0.0], [-0.8, 0.5], [1.0, 0.0], [0.9, -0.4], [-0.9, -0.2], [0.2, 0.1]],
        [0, 0, 1, 1, 1, 0],
    ),
}


def six_point(name) -> Dataset:
    X, y = SIX_POINT_FIXTURES[name]
    return Dataset(np.array(X), np.array(y), ("x1", "x2"))


@pytest.fixture(params=sorted(SIX_POINT_FIXTURES))
def six(request):
    return six_point(request.param)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def record(label: str, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
