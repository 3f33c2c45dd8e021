"""Localised eigenmodes of periodic media with bounded or semi-infinite defects.

Bounded defect (background cell ``T``, defect matrix ``D``): with ``v`` the
contracting eigenvector of ``T`` the mode condition is

    F(omega) = (-v2, v1) . D . (v1, -v2)^T = 0,

and the mode starts at ``x_0`` with ``(u, u') ~ (v1, -v2)``.

Interface (cell ``A`` for ``x < 0``, cell ``B`` for ``x > 0``):

    G(omega) = vA2 * vB1 + vA1 * vB2 = 0,

with ``(u, u')(0) ~ vB``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .medium import (BoundedDefect, DefectRegion, Interface, Medium, Periodic,
                     SegmentDefect, SmoothDefect, UnitCell, background_cell)
from .spectrum import bisect
from .transfer import (BandEdgeError, S, cell_matrix, conjugate_S,
                       contracting_eigenpair, gap_eigen, half_trace, propagator,
                       segments_matrix, segments_matrix_reverse)

RK4_STEPS_PER_WIDTH = 2000
DEFAULT_GRID = 2000
EDGE_INSET = 1e-6
ROOT_TOL = 1e-11
RESIDUAL_GATE = 1e-6
GAP_MARGIN = 1e-9


class ModeSearchError(RuntimeError):
    pass


# -- defect matrices ----------------------------------------------------------


def _rk4_fundamental(region: SmoothDefect, omega: np.ndarray, start: float, stop: float,
                     y0: np.ndarray | None = None) -> np.ndarray:
    """Integrate ``Y' = [[0, 1], [-(omega/c)^2, 0]] Y`` from ``start`` to ``stop``.

    Classical RK4 with step at most ``width / 2000``; breakpoints are always
    hit exactly.  ``y0`` defaults to the identity (fundamental matrix).
    """
    omega = np.asarray(omega, dtype=float)
    w2 = (omega * omega)[..., None, None]
    y = (np.broadcast_to(np.eye(2), omega.shape + (2, 2)) if y0 is None
         else np.broadcast_to(y0, omega.shape + y0.shape[-2:])).astype(float).copy()
    if start == stop:
        return y
    edges = [0.0, *region.breakpoints, region.width]
    lo, hi = min(start, stop), max(start, stop)
    knots = [lo] + [e for e in edges if lo < e < hi] + [hi]
    if stop < start:
        knots = knots[::-1]
    max_step = region.width / RK4_STEPS_PER_WIDTH

    def rhs(x, y):
        c = float(region.speed(np.asarray(x)))
        out = np.empty_like(y)
        out[..., 0, :] = y[..., 1, :]
        out[..., 1, :] = -(w2[..., 0, :] / (c * c)) * y[..., 0, :]
        return out

    for a, b in zip(knots[:-1], knots[1:]):
        n = max(1, math.ceil(abs(b - a) / max_step - 1e-9))
        step = (b - a) / n
        # Nudge evaluation points off the piece ends so one-sided limits are used.
        nudge = 1e-14 * region.width * np.sign(step)
        for k in range(n):
            x = a + k * step
            xa = x + nudge if k == 0 else x
            xb = x + step - nudge if k == n - 1 else x + step
            k1 = rhs(xa, y)
            k2 = rhs(x + 0.5 * step, y + 0.5 * step * k1)
            k3 = rhs(x + 0.5 * step, y + 0.5 * step * k2)
            k4 = rhs(xb, y + step * k3)
            y = y + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def defect_matrix_left(region: DefectRegion, omega) -> np.ndarray:
    """Maps ``(u, u')(x_0)`` to ``(u, u')(x_1)`` across the defect region."""
    omega = np.asarray(omega, dtype=float)
    if np.any(~(omega > 0)):
        raise ValueError("omega must be > 0")
    if isinstance(region, SegmentDefect):
        return segments_matrix(region.segments, omega)
    return _rk4_fundamental(region, omega, 0.0, region.width)


def defect_matrix_right(region: DefectRegion, omega) -> np.ndarray:
    """Maps ``(u, u')(x_1)`` back to ``(u, u')(x_0)``."""
    omega = np.asarray(omega, dtype=float)
    if np.any(~(omega > 0)):
        raise ValueError("omega must be > 0")
    if isinstance(region, SegmentDefect):
        return segments_matrix_reverse(region.segments, omega)
    return _rk4_fundamental(region, omega, region.width, 0.0)


def piecewise_region(segments, breakpoints_from_segments: bool = True) -> SmoothDefect:
    """The segment list as a :class:`SmoothDefect` (for integrator cross-checks)."""
    seg = SegmentDefect(segments)
    bps = seg.breakpoints()
    speeds = np.array([1.0 / s.slowness for s in seg.segments])

    def speed(x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(bps, x, side="right") - 1, 0, len(speeds) - 1)
        return speeds[idx]

    return SmoothDefect(speed, seg.width, tuple(bps[1:-1]) if breakpoints_from_segments else ())


# -- mode conditions ----------------------------------------------------------


def _check_gap(t: np.ndarray, what: str):
    bad = np.abs(t) - 1.0 <= GAP_MARGIN
    if np.any(bad):
        raise BandEdgeError(f"omega lies in a pass band (or on an edge) of the {what}")


def _bounded_condition(cell: UnitCell, region: DefectRegion, omega: np.ndarray) -> np.ndarray:
    T = cell_matrix(cell, omega)
    _check_gap(half_trace(T), "background")
    _, v = contracting_eigenpair(T)
    D = defect_matrix_left(region, omega)
    left = np.stack([-v[..., 1], v[..., 0]], axis=-1)
    right = np.stack([v[..., 0], -v[..., 1]], axis=-1)
    return np.einsum("...i,...ij,...j->...", left, D, right)


def _interface_condition(left: UnitCell, right: UnitCell, omega: np.ndarray) -> np.ndarray:
    TA, TB = cell_matrix(left, omega), cell_matrix(right, omega)
    _check_gap(half_trace(TA), "left medium")
    _check_gap(half_trace(TB), "right medium")
    _, va = contracting_eigenpair(TA)
    _, vb = contracting_eigenpair(TB)
    return va[..., 1] * vb[..., 0] + va[..., 0] * vb[..., 1]


def mode_condition_bounded(background: UnitCell, region: DefectRegion, omega):
    out = _bounded_condition(background, region, np.asarray(omega, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def mode_condition_interface(left: UnitCell, right: UnitCell, omega):
    out = _interface_condition(left, right, np.asarray(omega, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def condition_function(medium: Medium):
    """Vectorised mode condition of a defect medium."""
    if isinstance(medium, BoundedDefect):
        return lambda w: _bounded_condition(medium.cell, medium.region, np.asarray(w, dtype=float))
    if isinstance(medium, Interface):
        return lambda w: _interface_condition(medium.left, medium.right, np.asarray(w, dtype=float))
    raise TypeError("periodic media have no mode condition")


# -- root scan ----------------------------------------------------------------


def _bracket_sign_changes(f, grid: np.ndarray) -> tuple[list[int], bool]:
    vals = f(grid)
    mids = f(0.5 * (grid[1:] + grid[:-1]))
    s, sm = np.sign(vals), np.sign(mids)
    changes = list(np.flatnonzero(s[:-1] * s[1:] < 0))
    # Exact zeros on the grid count once, attached to the interval on their right.
    changes += [i for i in np.flatnonzero(s[:-1] == 0)]
    # Same sign at both ends but not at the midpoint: two roots in one interval.
    hidden = bool(np.any((s[:-1] * s[1:] > 0) & (sm * s[:-1] < 0)))
    return sorted(set(int(i) for i in changes)), hidden


def _tangent_pairs(scalar, grid: np.ndarray, vals: np.ndarray, changes: set[int],
                   tol: float) -> list[tuple[float, float]]:
    """Brackets for root pairs closer together than the grid spacing.

    Two nearly degenerate modes (identical defects far apart) make ``f`` dip
    through zero and back between two grid points.  Each local minimum of
    ``|f|`` away from a sign change is polished by a bounded minimisation of
    ``sign * f``; if the minimiser has the opposite sign it splits the
    interval into two brackets.
    """
    from scipy.optimize import minimize_scalar

    mag = np.abs(vals)
    out = []
    for i in range(1, len(grid) - 1):
        if not (mag[i] <= mag[i - 1] and mag[i] <= mag[i + 1]) or mag[i] == 0:
            continue
        if {i - 1, i} & changes:
            continue
        sgn = np.sign(vals[i])
        a, b = float(grid[i - 1]), float(grid[i + 1])
        res = minimize_scalar(lambda w: sgn * scalar(w), bounds=(a, b), method="bounded",
                              options={"xatol": tol})
        if res.fun < 0:
            out += [(a, float(res.x)), (float(res.x), b)]
    return out


def mode_frequencies(medium: Medium, gap: tuple[float, float], n_grid: int = DEFAULT_GRID,
                     tol: float = ROOT_TOL) -> list[float]:
    """Eigenfrequencies of localised modes inside ``gap``, sorted ascending."""
    if isinstance(medium, Periodic):
        return []
    lo, hi = map(float, gap)
    inset = EDGE_INSET * (hi - lo)
    f = condition_function(medium)
    for attempt, n in enumerate((n_grid, 10 * n_grid)):
        grid = np.linspace(lo + inset, hi - inset, n)
        idx, hidden = _bracket_sign_changes(f, grid)
        if not hidden:
            break
    else:
        raise ModeSearchError(
            f"two sign changes inside one grid interval persist at {10 * n_grid} points"
        )

    def scalar(w):
        return float(f(w))

    brackets = [(float(grid[i]), float(grid[i + 1])) for i in idx]
    brackets += _tangent_pairs(scalar, grid, f(grid), set(idx), tol)

    roots = []
    for a, b in sorted(brackets):
        fa = scalar(a)
        w = a if fa == 0.0 else bisect(scalar, a, b, tol, f_lo=fa)
        # A sign flip of an eigenvector (not a true zero) leaves |f| finite.
        scale = max(abs(fa), abs(scalar(b)))
        if abs(scalar(w)) <= max(RESIDUAL_GATE, 1e-3 * scale):
            roots.append(w)
    return sorted(roots)


# -- mode reconstruction ------------------------------------------------------


@dataclass(frozen=True)
class LocalizedMode:
    """A reconstructed defect mode.

    ``profile`` has columns ``(x, u, u')``.  ``mesh_n``/``mesh_x``/``mesh_state``
    hold the mesh points ``x_n`` and the state there.  The mode is scaled so
    that ``max |u(x_n)| = 1`` over the mesh.
    """

    omega: float
    boundary_u: float
    boundary_du: float
    profile: np.ndarray
    decay_left: float
    decay_right: float
    mesh_n: np.ndarray = field(repr=False)
    mesh_x: np.ndarray = field(repr=False)
    mesh_state: np.ndarray = field(repr=False)
    predicted_left: float = 0.0
    predicted_right: float = 0.0
    residual: float = 0.0

    @property
    def mesh_u(self) -> np.ndarray:
        return self.mesh_state[:, 0]


def _sample_segments(segments, omega: float, state0: np.ndarray, x0: float,
                     offsets: np.ndarray) -> np.ndarray:
    """States at ``x0 + offsets`` propagated through consecutive segments."""
    bps = np.concatenate([[0.0], np.cumsum([s.length for s in segments])])
    starts = [np.asarray(state0, dtype=float)]
    for seg in segments:
        starts.append(propagator(seg.slowness, seg.length, omega) @ starts[-1])
    idx = np.clip(np.searchsorted(bps, offsets, side="right") - 1, 0, len(segments) - 1)
    out = np.empty((len(offsets), 3))
    for j, (t, k) in enumerate(zip(offsets, idx)):
        seg = segments[k]
        st = propagator(seg.slowness, t - bps[k], omega) @ starts[k]
        out[j] = (x0 + t, st[0], st[1])
    return out


def _sample_region(region: DefectRegion, omega: float, state0: np.ndarray,
                   offsets: np.ndarray) -> np.ndarray:
    if isinstance(region, SegmentDefect):
        return _sample_segments(region.segments, omega, state0, 0.0, offsets)
    out = np.empty((len(offsets), 3))
    y = np.asarray(state0, dtype=float).reshape(2, 1)
    prev = 0.0
    for j, t in enumerate(offsets):
        y = _rk4_fundamental(region, np.asarray(omega), prev, float(t), y0=y)
        prev = float(t)
        out[j] = (t, y[0, 0], y[1, 0])
    return out


def _tail_slope(n: np.ndarray, u: np.ndarray) -> float:
    """Least-squares slope of ln|u| against distance from the defect."""
    keep = np.abs(u) > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(n[keep], np.log(np.abs(u[keep])), 1)[0])


def reconstruct_mode(medium: Medium, omega: float, samples_per_cell: int = 50,
                     n_cells: int = 20) -> LocalizedMode:
    """Build the mode profile at a root of the mode condition."""
    omega = float(omega)
    if isinstance(medium, Periodic):
        raise TypeError("periodic media carry no localised modes")
    f = condition_function(medium)
    residual = float(f(omega))
    if abs(residual) > RESIDUAL_GATE:
        raise ModeSearchError(
            f"mode-condition residual {residual:.3g} at omega={omega!r} exceeds "
            f"{RESIDUAL_GATE:g}; the tail would grow"
        )
    N = int(n_cells)
    frac = np.arange(samples_per_cell) / samples_per_cell

    if isinstance(medium, BoundedDefect):
        cell, region = medium.cell, medium.region
        h = cell.period
        width = region.width
        T = cell_matrix(cell, omega)
        eig = gap_eigen(T)
        v, lam = eig.v1, eig.lambda1
        U0 = np.array([v[0], -v[1]])
        U1 = defect_matrix_left(region, omega) @ U0
        # Keep only the decaying component on the right; the dropped part is
        # the (tiny) residual of the mode condition.
        a = float(np.dot(U1, v))
        n_right = np.arange(1, N + 2)
        n_left = np.arange(-N, 1)
        right_states = a * lam ** (n_right - 1)[:, None] * v[None, :]
        left_states = lam ** (-n_left)[:, None] * U0[None, :]
        mesh_n = np.concatenate([n_left, n_right])
        mesh_x = np.concatenate([n_left * h, width + (n_right - 1) * h])
        mesh_state = np.concatenate([left_states, right_states])

        n_def = max(samples_per_cell, int(round(samples_per_cell * width / h)))
        pieces = [_sample_region(region, omega, U0, width * np.arange(n_def) / n_def)]
        for n, st, x in zip(mesh_n[:-1], mesh_state[:-1], mesh_x[:-1]):
            if n == 0:
                continue
            pieces.append(_sample_segments(cell.segments, omega, st, x, h * frac))
        pieces.append(np.array([[mesh_x[-1], *mesh_state[-1]]]))
        profile = np.concatenate(pieces)
        order = np.argsort(profile[:, 0], kind="stable")
        profile = profile[order]
        pred_left = pred_right = eig.decay_per_cell
        dist_left, dist_right = -n_left, n_right - 1
        boundary = U0
    elif isinstance(medium, Interface):
        A, B = medium.left, medium.right
        h = B.period
        eA, eB = gap_eigen(cell_matrix(A, omega)), gap_eigen(cell_matrix(B, omega))
        U0 = eB.v1
        SvA = S @ eA.v1
        a = float(np.dot(U0, SvA))
        n_right = np.arange(1, N + 1)
        n_left = np.arange(-N, 0)
        right_states = eB.lambda1 ** n_right[:, None] * U0[None, :]
        left_states = a * eA.lambda1 ** (-n_left)[:, None] * SvA[None, :]
        mesh_n = np.concatenate([n_left, [0], n_right])
        mesh_x = mesh_n * h
        mesh_state = np.concatenate([left_states, U0[None, :], right_states])
        pieces = []
        for n, st, x in zip(mesh_n[:-1], mesh_state[:-1], mesh_x[:-1]):
            segs = A.segments if n < 0 else B.segments
            pieces.append(_sample_segments(segs, omega, st, x, h * frac))
        pieces.append(np.array([[mesh_x[-1], *mesh_state[-1]]]))
        profile = np.concatenate(pieces)
        pred_left, pred_right = eA.decay_per_cell, eB.decay_per_cell
        dist_left, dist_right = -n_left, n_right
        boundary = U0
    else:
        raise TypeError(f"unsupported medium {type(medium).__name__}")

    scale = float(np.max(np.abs(mesh_state[:, 0])))
    if scale == 0.0:
        scale = float(np.max(np.abs(profile[:, 1])))
    mesh_state = mesh_state / scale
    profile = profile.copy()
    profile[:, 1:] /= scale
    boundary = boundary / scale

    u_left = mesh_state[: len(dist_left), 0]
    u_right = mesh_state[len(mesh_state) - len(dist_right):, 0]
    sel_l = dist_left >= N // 2
    sel_r = dist_right >= N // 2
    decay_left = -_tail_slope(dist_left[sel_l], u_left[sel_l])
    decay_right = -_tail_slope(dist_right[sel_r], u_right[sel_r])

    return LocalizedMode(
        omega=omega,
        boundary_u=float(boundary[0]),
        boundary_du=float(boundary[1]),
        profile=profile,
        decay_left=decay_left,
        decay_right=decay_right,
        mesh_n=mesh_n,
        mesh_x=mesh_x,
        mesh_state=mesh_state,
        predicted_left=pred_left,
        predicted_right=pred_right,
        residual=residual,
    )


def find_modes(medium: Medium, gap: tuple[float, float], n_grid: int = DEFAULT_GRID,
               tol: float = ROOT_TOL, samples_per_cell: int = 50,
               n_cells: int = 20) -> list[LocalizedMode]:
    return [reconstruct_mode(medium, w, samples_per_cell, n_cells)
            for w in mode_frequencies(medium, gap, n_grid, tol)]


def decay_rates(medium: Medium, omega: float) -> tuple[float, float]:
    """Per-cell decay ``-ln|lambda1|`` on the left and right of the defect."""
    if isinstance(medium, Interface):
        left = gap_eigen(cell_matrix(medium.left, omega)).decay_per_cell
        right = gap_eigen(cell_matrix(medium.right, omega)).decay_per_cell
        return left, right
    rate = gap_eigen(cell_matrix(background_cell(medium), omega)).decay_per_cell
    return rate, rate


def sign_changes_in_region(mode: LocalizedMode, start: float, stop: float) -> int:
    """Number of sign changes of ``u`` over profile samples in ``(start, stop)``."""
    x, u = mode.profile[:, 0], mode.profile[:, 1]
    sel = (x > start) & (x < stop)
    s = np.sign(u[sel])
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


# -- independent checks -------------------------------------------------------


def _layout(medium: Medium, x_lo: float, x_hi: float) -> list[tuple[float, float, float | None]]:
    """Pieces ``(start, end, slowness)`` covering ``[x_lo, x_hi]``.

    ``slowness`` is ``None`` for a smooth defect region.  Positions follow the
    profile convention: a bounded defect occupies ``[0, width]`` with the
    background tiled on both sides; an interface sits at ``x = 0``.
    """
    def tiles(cell: UnitCell, origin: float):
        h = cell.period
        k0 = math.floor((x_lo - origin) / h) - 1
        k1 = math.ceil((x_hi - origin) / h) + 1
        for k in range(k0, k1 + 1):
            x = origin + k * h
            for i, seg in enumerate(cell.segments):
                end = origin + (k + 1) * h if i == len(cell.segments) - 1 else x + seg.length
                yield x, end, seg.slowness
                x = end

    def mid(p):
        return 0.5 * (p[0] + p[1])

    if isinstance(medium, BoundedDefect):
        region, width = medium.region, medium.region.width
        parts = [p for p in tiles(medium.cell, 0.0) if mid(p) < 0.0]
        if isinstance(region, SegmentDefect):
            x = 0.0
            for seg in region.segments:
                parts.append((x, x + seg.length, seg.slowness))
                x += seg.length
        else:
            parts.append((0.0, width, None))
        parts += [p for p in tiles(medium.cell, width) if mid(p) > width]
    elif isinstance(medium, Interface):
        parts = [p for p in tiles(medium.left, 0.0) if mid(p) < 0.0]
        parts += [p for p in tiles(medium.right, 0.0) if mid(p) > 0.0]
    else:
        raise TypeError(f"unsupported medium {type(medium).__name__}")
    return [p for p in parts if p[1] > x_lo and p[0] < x_hi]


def helmholtz_residual(medium: Medium, mode: LocalizedMode) -> float:
    """Largest mismatch when each profile sample is propagated to the next.

    Every pair of neighbouring samples is joined by exact propagation through
    the pieces in between (RK4 across a smooth region), so a profile that
    solves the equation with continuous ``(u, u')`` gives round-off only.
    Mismatches are scaled by the largest ``|u|`` and ``|u'|`` of the profile.
    """
    x, st = mode.profile[:, 0], mode.profile[:, 1:]
    scale = np.max(np.abs(st), axis=0)
    scale[scale == 0] = 1.0
    pieces = _layout(medium, float(x[0]), float(x[-1]))
    region = getattr(medium, "region", None)
    worst = 0.0
    j0 = 0
    for i in range(len(x) - 1):
        a, b = float(x[i]), float(x[i + 1])
        while j0 < len(pieces) and pieces[j0][1] <= a:
            j0 += 1
        y = st[i].copy()
        j = j0
        while j < len(pieces) and pieces[j][0] < b:
            p0, p1, r = pieces[j]
            lo, hi = max(a, p0), min(b, p1)
            if hi > lo:
                if r is None:
                    y = _rk4_fundamental(region, np.asarray(mode.omega), lo, hi,
                                         y0=y.reshape(2, 1))[:, 0]
                else:
                    y = propagator(r, hi - lo, mode.omega) @ y
            j += 1
        worst = max(worst, float(np.max(np.abs(y - st[i + 1]) / scale)))
    return worst
