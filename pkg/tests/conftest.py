import numpy as np
import pytest
from hypothesis import strategies as st

from bandgap.medium import Segment, UnitCell

# Shared acceptance results, printed once at the end of the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


slowness = st.floats(0.3, 12.0, allow_nan=False, allow_infinity=False)
length = st.floats(0.05, 1.5, allow_nan=False, allow_infinity=False)
omega = st.floats(0.01, 3.0, allow_nan=False, allow_infinity=False)
segment_lists = st.lists(st.tuples(slowness, length), min_size=1, max_size=6)


@st.composite
def symmetric_cells(draw):
    half = draw(st.lists(st.tuples(slowness, length), min_size=1, max_size=3))
    middle = draw(st.none() | st.tuples(slowness, length))
    segs = half + ([middle] if middle else []) + half[::-1]
    return UnitCell.from_segments([Segment(*s) for s in segs])


def random_cells(rng: np.random.Generator, n: int, max_segments: int = 5):
    """``n`` random piecewise-constant cells, for vectorised bulk checks."""
    out = []
    for _ in range(n):
        k = int(rng.integers(1, max_segments + 1))
        out.append(UnitCell.from_segments(
            [Segment(float(rng.uniform(0.3, 12)), float(rng.uniform(0.05, 1.5))) for _ in range(k)]))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
