import sys
from pathlib import Path

import pytest

from diagnostica.tabular import Dataset

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one line per acceptance criterion after the run."""
    try:
        import test_acceptance
    except Exception:
        return
    lines = getattr(test_acceptance, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def reference_dataset() -> Dataset:
    """Eight-row two-attribute table used across the mining tests."""
    rows = [("a1", "b1", 1), ("a1", "b1", 1), ("a1", "b2", 1),
            ("a1", "b2", 0), ("a2", "b1", 0), ("a2", "b1", 0),
            ("a2", "b2", 0), ("a2", "b2", 1)]
    return Dataset(
        {"A": [r[0] for r in rows], "B": [r[1] for r in rows]},
        {"A": "nominal", "B": "nominal"},
        binary_target=("T", [bool(r[2]) for r in rows]),
    )
