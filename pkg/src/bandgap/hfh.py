"""High-frequency homogenised envelopes of defect modes.

All matrices are evaluated at the band-edge frequency ``omega0`` about which
the two-scale expansion is made.  Coefficients are decay rates per cell on the
mesh index, so the predicted envelope is ``exp(-coefficient * |n - center|)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .medium import DefectRegion, UnitCell
from .defect import defect_matrix_left, defect_matrix_right
from .transfer import cell_matrix, conjugate_S, half_trace

ANTIPERIODIC_TOL = 1e-6
LEMMA_TOL = 1e-8


class EnvelopeError(ValueError):
    pass


@dataclass(frozen=True)
class Envelope:
    coefficient: float
    center: float
    edge_omega: float
    kind: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "coefficient": self.coefficient,
                "center": self.center, "edge_omega": self.edge_omega}


def _check_antiperiodic_edge(T: np.ndarray, omega0: float):
    t = float(half_trace(T))
    if abs(t + 1.0) > ANTIPERIODIC_TOL:
        raise EnvelopeError(
            f"omega0={omega0!r} is not an anti-periodic band edge (tr T/2 = {t:.9g})"
        )


def edge_perturbations(background: UnitCell, region: DefectRegion,
                       omega0: float) -> tuple[np.ndarray, np.ndarray]:
    """``(D^L - T, S D^R S - T)`` at ``omega0``: the left and right defect jumps."""
    T = cell_matrix(background, omega0)
    PL = defect_matrix_left(region, omega0) - T
    PR = conjugate_S(defect_matrix_right(region, omega0)) - T
    return PL, PR


def symmetric_coefficient(background: UnitCell, region: DefectRegion, omega0) -> np.ndarray:
    """``(D^L)_11 - T_11`` without the edge/sign checks (vectorised over omega)."""
    T = cell_matrix(background, omega0)
    D = defect_matrix_left(region, omega0)
    return D[..., 0, 0] - T[..., 0, 0]


def envelope_symmetric_bounded(background: UnitCell, region: DefectRegion,
                               edge_omega: float) -> Envelope:
    if not region.is_symmetric:
        raise EnvelopeError("defect region is not symmetric; use envelope_asymmetric_bounded")
    T = cell_matrix(background, edge_omega)
    _check_antiperiodic_edge(T, edge_omega)
    coef = float(defect_matrix_left(region, edge_omega)[0, 0] - T[0, 0])
    if coef <= 0:
        raise EnvelopeError(
            f"coefficient {coef:.6g} <= 0 at omega0={edge_omega:.9g}: "
            "no localised envelope at this edge"
        )
    return Envelope(coef, 0.5, float(edge_omega), "symmetric_bounded")


def _eigvec(A: np.ndarray, c: float) -> np.ndarray | None:
    """Unit eigenvector of ``A`` for ``c``; ``None`` when ``A = c I``."""
    a = np.array([A[0, 1], c - A[0, 0]])
    b = np.array([c - A[1, 1], A[1, 0]])
    v = a if np.hypot(*a) >= np.hypot(*b) else b
    norm = np.hypot(*v)
    if norm <= 1e-12 * max(1.0, np.abs(A).max()):
        return None
    return v / norm


def envelope_asymmetric_bounded(background: UnitCell, region: DefectRegion,
                                edge_omega: float) -> tuple[Envelope, Envelope]:
    """Envelopes of ``u`` and ``u'`` for a defect of arbitrary shape.

    Evaluating both localised solutions at the two defect sites with
    ``exp(-coefficient * eps) -> 1`` couples ``(f, g)`` through

        2 c (f, g)^T = (P^L + S P^R S) (f, g)^T.

    Symmetry of the background gives ``T_11 == T_22`` identically, so ``f``
    and ``g`` share the coefficient ``c``; it is the eigenvalue of
    ``(P^L + S P^R S) / 2`` whose eigenvector is closest to the band-edge
    standing wave.
    """
    T = cell_matrix(background, edge_omega)
    _check_antiperiodic_edge(T, edge_omega)
    PL, PR = edge_perturbations(background, region, edge_omega)
    A = 0.5 * (PL + conjugate_S(PR))
    if np.allclose(A, 0.0, atol=1e-14):
        raise EnvelopeError("defect leaves the edge unperturbed; no localised envelope")

    # Closed-form eigenvalues of the 2x2 coupling (double roots occur for
    # symmetric regions, so a sign-change search would miss them).
    # tr^2/4 - det, written without the cancellation that would cost half
    # the digits when the roots coincide.
    tr = A[0, 0] + A[1, 1]
    disc = 0.25 * (A[0, 0] - A[1, 1]) ** 2 + A[0, 1] * A[1, 0]
    if disc < -1e-12 * max(tr * tr, abs(A[0, 1] * A[1, 0])):
        raise EnvelopeError("no localised envelope at this edge (complex coupling eigenvalues)")
    root = np.sqrt(max(disc, 0.0))
    candidates = []
    for c in (0.5 * tr + root, 0.5 * tr - root):
        if c > 0:
            candidates.append((float(c), _eigvec(A, c)))
    if not candidates:
        raise EnvelopeError("no localised envelope at this edge (no positive coefficient)")

    # Standing wave at an anti-periodic edge: (1, 0) when T_21 vanishes,
    # (0, 1) when T_12 does.
    standing = np.array([1.0, 0.0]) if abs(T[1, 0]) <= abs(T[0, 1]) else np.array([0.0, 1.0])
    c, _ = max(candidates, key=lambda cv: (
        1.0 if cv[1] is None else abs(float(np.dot(cv[1], standing))), cv[0]))
    w = float(edge_omega)
    return (Envelope(c, 0.5, w, "asymmetric_bounded"),
            Envelope(c, 0.5, w, "asymmetric_bounded"))


def interface_lemma_residuals(left: UnitCell, right: UnitCell, omega) -> dict[str, np.ndarray]:
    TA, TB = cell_matrix(left, omega), cell_matrix(right, omega)
    P = TB - TA
    return {
        "T_A diagonal equality": np.abs(TA[..., 0, 0] - TA[..., 1, 1]),
        "T_B diagonal equality": np.abs(TB[..., 0, 0] - TB[..., 1, 1]),
        "P_11 = 0": np.abs(P[..., 0, 0]),
        "P_22 = 0": np.abs(P[..., 1, 1]),
    }


def envelope_interface(left: UnitCell, right: UnitCell, edge_omega: float) -> Envelope:
    for name, value in interface_lemma_residuals(left, right, edge_omega).items():
        if float(value) > LEMMA_TOL:
            raise EnvelopeError(f"lemma violated: {name} (residual {float(value):.3g})")
    P = cell_matrix(right, edge_omega) - cell_matrix(left, edge_omega)
    product = float(P[0, 1] * P[1, 0])
    if product < 0:
        raise EnvelopeError("media pair outside the envelope hypotheses (negative product under root)")
    coef = 0.5 * np.sqrt(product)
    if coef <= 0:
        raise EnvelopeError("identical media on both sides: no localisation")
    return Envelope(float(coef), 0.0, float(edge_omega), "interface")


def predict_profile(env: Envelope, n_range: Iterable[int]) -> np.ndarray:
    """Rows ``(n, |u|)`` of the envelope, scaled so the largest value is 1."""
    n = np.asarray(list(n_range), dtype=float)
    vals = np.exp(-env.coefficient * np.abs(n - env.center))
    if vals.size:
        vals = vals / vals.max()
    return np.column_stack([n, vals])
