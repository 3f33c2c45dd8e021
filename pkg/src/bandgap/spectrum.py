"""Floquet-Bloch dispersion, pass bands and gaps of a periodic cell."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .medium import UnitCell
from .transfer import cell_matrix, half_trace

DEFAULT_SAMPLES = 4096
EDGE_TOL = 1e-10
MIN_GAP_WIDTH = 1e-6


class GridTooCoarseError(RuntimeError):
    pass


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float,
           f_lo: float | None = None) -> float:
    """Bisection for a sign change of ``f`` on ``[lo, hi]``.

    Stops once the bracket is narrower than ``tol`` or can no longer be split
    in floating point.
    """
    if f_lo is None:
        f_lo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cell_half_trace(cell: UnitCell, omega) -> np.ndarray:
    return half_trace(cell_matrix(cell, omega))


@dataclass(frozen=True)
class BandStructure:
    """Sampled dispersion of one cell.

    ``alpha`` is NaN at samples that fall inside a gap.  ``gaps`` holds only
    gaps with both edges inside the scanned range; ``open_top`` is set when
    the scan ends inside a gap.
    """

    omega: np.ndarray
    half_trace: np.ndarray
    alpha: np.ndarray
    bands: list[tuple[float, float]]
    gaps: list[tuple[float, float]]
    period: float
    open_top: bool = False
    edges: list[float] = field(default_factory=list)

    def samples(self) -> Iterator[tuple[float, float, float | None]]:
        for w, t, a in zip(self.omega, self.half_trace, self.alpha):
            yield float(w), float(t), (None if np.isnan(a) else float(a))


def _count_sign_changes(values: np.ndarray) -> int:
    s = np.sign(values)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _refine_edge(cell: UnitCell, lo: float, hi: float, tol: float) -> float:
    def g(w):
        return abs(float(cell_half_trace(cell, w))) - 1.0

    probe = np.linspace(lo, hi, 17)
    if _count_sign_changes(np.abs(cell_half_trace(cell, probe)) - 1.0) > 1:
        raise GridTooCoarseError(
            f"more than one band edge in ({lo:.6g}, {hi:.6g}); rerun with a finer grid"
        )
    return bisect(g, lo, hi, tol)


def dispersion_scan(cell: UnitCell, omega_max: float, n_samples: int = DEFAULT_SAMPLES,
                    edge_tol: float = EDGE_TOL) -> BandStructure:
    """Classify a uniform grid on ``(0, omega_max]`` into bands and gaps."""
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    if not omega_max > 0:
        raise ValueError("omega_max must be > 0")
    h = cell.period
    omega = omega_max * np.arange(1, n_samples + 1) / n_samples
    ht = cell_half_trace(cell, omega)
    in_gap = np.abs(ht) > 1.0
    alpha = np.where(in_gap, np.nan, np.arccos(np.clip(ht, -1.0, 1.0)) / h)

    edges = []
    for i in np.flatnonzero(in_gap[1:] != in_gap[:-1]):
        edges.append(_refine_edge(cell, float(omega[i]), float(omega[i + 1]), edge_tol))

    # Intervals alternate starting from the class of the first sample.
    bounds = [0.0, *edges, float(omega_max)]
    first_is_gap = bool(in_gap[0])
    intervals = [(bounds[k], bounds[k + 1], first_is_gap ^ (k % 2 == 1))
                 for k in range(len(bounds) - 1)]

    # Drop slivers of gap between touching bands and merge neighbours.
    merged: list[list] = []
    for lo, hi, is_gap in intervals:
        if is_gap and hi - lo < MIN_GAP_WIDTH and 0 < len(merged):
            continue
        if merged and merged[-1][2] == is_gap:
            merged[-1][1] = hi
        else:
            merged.append([lo, hi, is_gap])

    bands = [(lo, hi) for lo, hi, g in merged if not g]
    gaps = [(lo, hi) for lo, hi, g in merged if g]
    open_top = bool(merged and merged[-1][2])
    if open_top:
        gaps = gaps[:-1]
    if first_is_gap and gaps and gaps[0][0] == 0.0:
        gaps = gaps[1:]
    kept_edges = sorted({e for lo, hi, _ in merged for e in (lo, hi)} - {0.0, float(omega_max)})
    return BandStructure(omega, ht, alpha, bands, gaps, h, open_top, kept_edges)


def band_edges(bs: BandStructure, gap_index: int) -> tuple[float, float]:
    if not 0 <= gap_index < len(bs.gaps):
        raise IndexError(f"gap index {gap_index} out of range (found {len(bs.gaps)} gaps)")
    return bs.gaps[gap_index]


def find_gaps(cell: UnitCell, omega_max: float, n_samples: int = DEFAULT_SAMPLES) -> list[tuple[float, float]]:
    return dispersion_scan(cell, omega_max, n_samples).gaps


def common_gaps(left: UnitCell, right: UnitCell, omega_max: float,
                n_samples: int = DEFAULT_SAMPLES) -> list[tuple[float, float]]:
    """Intersections of the gaps of two cells."""
    out = []
    for a_lo, a_hi in find_gaps(left, omega_max, n_samples):
        for b_lo, b_hi in find_gaps(right, omega_max, n_samples):
            lo, hi = max(a_lo, b_lo), min(a_hi, b_hi)
            if hi - lo >= MIN_GAP_WIDTH:
                out.append((lo, hi))
    return sorted(out)


def bloch_alpha(cell: UnitCell, omega: float) -> float | None:
    t = float(cell_half_trace(cell, omega))
    if abs(t) > 1.0:
        return None
    return float(np.arccos(max(-1.0, min(1.0, t)))) / cell.period


def touching_frequency(cell: UnitCell, lo: float, hi: float) -> float:
    """Frequency in ``[lo, hi]`` where ``|tr T / 2|`` comes closest to 1 from inside a band.

    Locates the point where two bands touch (a closed gap) for media such as
    the SSH cell with ``d = 1/2``.
    """
    from scipy.optimize import minimize_scalar

    res = minimize_scalar(lambda w: 1.0 - abs(float(cell_half_trace(cell, w))),
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x)
