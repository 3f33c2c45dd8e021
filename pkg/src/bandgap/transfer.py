"""2x2 transfer matrices for the state ``(u, u')`` of ``u'' + (omega r)^2 u = 0``.

Matrices are plain numpy arrays of shape ``(..., 2, 2)``; every function
broadcasts over a leading array of frequencies so that whole frequency grids
are evaluated in one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .medium import Segment, UnitCell

S = np.diag([1.0, -1.0])
EDGE_MARGIN = 1e-12


class BandEdgeError(ValueError):
    """Frequency lies in a pass band or on a band edge."""


def _check_omega(omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if np.any(~(omega > 0)):
        raise ValueError("omega must be > 0 (the propagator is singular at omega = 0)")
    return omega


def propagator(slowness: float, length, omega) -> np.ndarray:
    """Propagator across a constant stretch; ``length`` may be negative or an array."""
    omega = np.asarray(omega, dtype=float)
    length = np.asarray(length, dtype=float)
    k = slowness * omega
    phase = k * length
    c, s = np.cos(phase), np.sin(phase)
    k = np.broadcast_to(k, phase.shape)
    m = np.empty(phase.shape + (2, 2))
    m[..., 0, 0] = c
    m[..., 0, 1] = s / k
    m[..., 1, 0] = -k * s
    m[..., 1, 1] = c
    return m


def tc(slowness: float, length: float, omega) -> np.ndarray:
    """Transfer matrix of one constant segment."""
    if not slowness > 0 or not length > 0:
        raise ValueError("slowness and length must be > 0")
    return propagator(slowness, length, _check_omega(omega))


def segments_matrix(segments: Iterable[Segment], omega) -> np.ndarray:
    """Left-to-right product over a segment list (rightmost segment applied last)."""
    omega = _check_omega(omega)
    m = np.broadcast_to(np.eye(2), omega.shape + (2, 2)).copy()
    for seg in segments:
        m = propagator(seg.slowness, seg.length, omega) @ m
    return m


def segments_matrix_reverse(segments: Iterable[Segment], omega) -> np.ndarray:
    """Propagator from the right end of a segment list back to its left end."""
    omega = _check_omega(omega)
    m = np.broadcast_to(np.eye(2), omega.shape + (2, 2)).copy()
    for seg in reversed(tuple(segments)):
        m = propagator(seg.slowness, -seg.length, omega) @ m
    return m


def cell_matrix(cell: UnitCell, omega) -> np.ndarray:
    return segments_matrix(cell.segments, omega)


def conjugate_S(m: np.ndarray) -> np.ndarray:
    """``S m S``: flips the signs of the off-diagonal entries."""
    out = np.array(m, dtype=float, copy=True)
    out[..., 0, 1] *= -1
    out[..., 1, 0] *= -1
    return out


def det(m: np.ndarray) -> np.ndarray:
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def half_trace(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m[..., 0, 0] + m[..., 1, 1])


def _gap_eigenvalues(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Stable quadratic root: q has the larger magnitude, lambda1 = 1/q.
    t = half_trace(m)
    q = t + np.sign(t) * np.sqrt(t * t - 1.0)
    return 1.0 / q, q


def _eigenvector(m: np.ndarray, lam: np.ndarray) -> np.ndarray:
    a = np.stack([m[..., 0, 1], lam - m[..., 0, 0]], axis=-1)
    b = np.stack([lam - m[..., 1, 1], m[..., 1, 0]], axis=-1)
    na = np.hypot(a[..., 0], a[..., 1])
    nb = np.hypot(b[..., 0], b[..., 1])
    use_a = (na >= nb)[..., None]
    v = np.where(use_a, a, b) / np.maximum(na, nb)[..., None]
    flip = (v[..., 0] < 0) | ((v[..., 0] == 0) & (v[..., 1] < 0))
    return np.where(flip[..., None], -v, v)


def contracting_eigenpair(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``(lambda1, v1)`` for matrices known to lie inside a gap.

    No gap check is made; callers that cannot guarantee it should use
    :func:`gap_eigen`.
    """
    lam1, _ = _gap_eigenvalues(m)
    return lam1, _eigenvector(m, lam1)


@dataclass(frozen=True)
class GapEigen:
    lambda1: float
    lambda2: float
    v1: np.ndarray
    v2: np.ndarray

    @property
    def decay_per_cell(self) -> float:
        return -float(np.log(abs(self.lambda1)))


def gap_eigen(m: np.ndarray) -> GapEigen:
    """Real eigen-decomposition of a unimodular matrix strictly inside a gap."""
    m = np.asarray(m, dtype=float)
    t = float(half_trace(m))
    if abs(t) - 1.0 <= EDGE_MARGIN:
        raise BandEdgeError(
            f"inside pass band or at band edge (|tr/2| = {abs(t):.15g}); "
            "eigenvectors are complex or degenerate"
        )
    lam1, lam2 = _gap_eigenvalues(m)
    return GapEigen(float(lam1), float(lam2), _eigenvector(m, lam1), _eigenvector(m, lam2))
