"""Parameter sweeps and inverse design of defect modes.

Three tools live here: mode curves of the dislocated SSH medium as the
dislocation length grows, a scalar inverse solve that tunes one defect
parameter until a mode sits on a target frequency, and composite multi-defect
(rainbow) devices built from several solved defects.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .defect import DEFAULT_GRID, ROOT_TOL, find_modes, mode_frequencies
from .medium import (BoundedDefect, DefectRegion, Segment, SegmentDefect, UnitCell,
                     local_defect_cell, preset_ssh, preset_ssh_dislocated)
from .spectrum import bisect, dispersion_scan

DesignFamily = Callable[[float], DefectRegion]

OMEGA_TOL = 1e-6
PARAM_TOL = 1e-12
# Largest frequency move accepted between two linked sweep points, as a
# fraction of the gap width.  Wider intervals are subdivided in the parameter.
LINK_FRACTION = 0.05
MIN_PARAM_STEP = 1e-6


class DesignError(RuntimeError):
    pass


def thread_count() -> int:
    """Worker processes for sweeps, read from ``BANDGAP_THREADS`` (default 1)."""
    raw = os.environ.get("BANDGAP_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"BANDGAP_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


# -- dislocation sweep --------------------------------------------------------


@dataclass
class SweepResult:
    """Mode frequencies against one scalar parameter.

    ``points`` holds ``(value, omegas)`` for every requested parameter value
    that solved; ``errors`` maps the values that failed to their messages.
    ``curves`` are the continued mode branches as ``(value, omega)`` lists;
    they include the extra parameter values visited while resolving fast
    moving branches, so consecutive entries never differ by more than
    ``max_link`` in frequency.
    """

    parameter_name: str
    points: list[tuple[float, list[float]]]
    gap: tuple[float, float]
    curves: list[list[tuple[float, float]]] = field(default_factory=list)
    errors: dict[float, str] = field(default_factory=dict)
    max_link: float = 0.0

    def rows(self) -> list[tuple[float, float, int]]:
        """``(value, omega, curve_id)`` sorted by value then curve."""
        out = [(p, w, cid) for cid, c in enumerate(self.curves) for p, w in c]
        return sorted(out, key=lambda r: (r[0], r[2]))


def _ssh_modes(args) -> tuple[list[float] | None, str | None]:
    r, d, a, l, gap, n_grid, tol = args
    try:
        m = preset_ssh_dislocated(r, d, a, l)
        return mode_frequencies(m, gap, n_grid, tol), None
    except Exception as exc:  # recorded per point, never fatal
        return None, f"{type(exc).__name__}: {exc}"


def _order_link(w0: Sequence[float], w1: Sequence[float], gap: tuple[float, float],
                limit: float, force: bool = False):
    """Pair two sorted mode lists preserving order.

    Eigenvalues of a Sturm-Liouville problem never cross, so a branch keeps
    its rank among the modes and modes only enter or leave through the gap
    edges; between two samples this shows up as an index offset ``k``.  An
    offset is admissible when every paired move is within ``limit`` and every
    unpaired mode is within ``limit`` of an edge.  Among admissible offsets
    the one pairing the most modes wins; a tie, or no admissible offset,
    returns ``None`` so that the caller subdivides.
    With ``force`` the offset with the smallest largest move is taken.
    """
    def near_edge(w):
        return min(w - gap[0], gap[1] - w) <= limit

    admissible, fallback = [], None
    for k in range(-len(w0), len(w1) + 1):
        pairs = {i: i + k for i in range(len(w0)) if 0 <= i + k < len(w1)}
        moved = max((abs(w1[j] - w0[i]) for i, j in pairs.items()), default=0.0)
        if fallback is None or (moved, -len(pairs)) < fallback[0]:
            fallback = ((moved, -len(pairs)), pairs)
        lost = [w0[i] for i in range(len(w0)) if i not in pairs]
        born = [w1[j] for j in range(len(w1)) if j not in pairs.values()]
        if moved <= limit and all(near_edge(w) for w in lost + born) and pairs not in admissible:
            admissible.append(pairs)
    if admissible:
        most = max(len(p) for p in admissible)
        top = [p for p in admissible if len(p) == most]
        if len(top) == 1:
            return top[0]
    if force:
        return fallback[1] if fallback else {}
    return None


def optical_length(cell: UnitCell) -> float:
    return float(sum(s.slowness * s.length for s in cell.segments))


def sweep_dislocation(r: float, d: float, a: float, l_values: Sequence[float],
                      gap_index: int = 0, n_grid: int = DEFAULT_GRID, tol: float = ROOT_TOL,
                      omega_max: float | None = None, threads: int | None = None) -> SweepResult:
    """Mode curves of the dislocated SSH medium over a grid of lengths ``l``."""
    l_values = [float(v) for v in l_values]
    if any(v < 0 for v in l_values):
        raise ValueError("dislocation lengths must be nonnegative")
    if any(b <= a_ for a_, b in zip(l_values, l_values[1:])):
        raise ValueError("dislocation lengths must be strictly increasing")

    cell = preset_ssh(r, d, a).cell
    # The first gaps sit near multiples of pi over the optical length.
    wmax = omega_max if omega_max is not None else 4.0 * np.pi / optical_length(cell)
    bs = dispersion_scan(cell, wmax)
    if gap_index >= len(bs.gaps):
        raise DesignError(f"gap {gap_index} not found below omega={wmax:.6g}")
    gap = bs.gaps[gap_index]
    limit = LINK_FRACTION * (gap[1] - gap[0])

    jobs = [(r, d, a, l, gap, n_grid, tol) for l in l_values]
    n_workers = thread_count() if threads is None else max(1, threads)
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_ssh_modes, jobs, chunksize=max(1, len(jobs) // (4 * n_workers))))
    else:
        results = [_ssh_modes(j) for j in jobs]

    points, errors = [], {}
    for l, (ws, err) in zip(l_values, results):
        if err is not None:
            errors[l] = err
        else:
            points.append((l, ws))

    def modes(l):
        ws, err = _ssh_modes((r, d, a, l, gap, n_grid, tol))
        if err is not None:
            raise DesignError(err)
        return ws

    # Continuation: walk consecutive solved points, subdividing an interval
    # in l until every branch moves by at most ``limit`` between samples.
    curves: list[list[tuple[float, float]]] = []
    active: dict[int, int] = {}  # mode index at the current sample -> curve id

    def start(l, ws):
        active.clear()
        for i, w in enumerate(ws):
            curves.append([(l, w)])
            active[i] = len(curves) - 1

    def advance(l, ws, link):
        nonlocal active
        new_active = {}
        for i, j in link.items():
            if i in active:
                cid = active[i]
                curves[cid].append((l, ws[j]))
                new_active[j] = cid
        for j, w in enumerate(ws):
            if j not in new_active:
                curves.append([(l, w)])
                new_active[j] = len(curves) - 1
        active = new_active

    def walk(l0, w0, l1, w1):
        """Advance the active curves from (l0, w0) to (l1, w1)."""
        finest = l1 - l0 <= MIN_PARAM_STEP
        link = _order_link(w0, w1, gap, limit, force=finest)
        if link is not None:
            advance(l1, w1, link)
            return
        lm = 0.5 * (l0 + l1)
        try:
            wm = modes(lm)
        except DesignError:
            advance(l1, w1, {})
            return
        walk(l0, w0, lm, wm)
        walk(lm, wm, l1, w1)

    prev = None
    position = {l: k for k, l in enumerate(l_values)}
    for l, ws in points:
        contiguous = prev is not None and position[l] == position[prev[0]] + 1
        if not contiguous:
            start(l, ws)
        else:
            walk(prev[0], prev[1], l, ws)
        prev = (l, ws)

    curves = [c for c in curves if c]
    return SweepResult("l", points, gap, curves, errors, limit)


def default_l_grid(step: float = 0.05, stop: float = 25.0) -> np.ndarray:
    return np.round(np.arange(0.0, stop + 0.5 * step, step), 12)


# -- inverse design -----------------------------------------------------------


def local_defect_family(r: float) -> DesignFamily:
    """Parameter ``R`` -> the point-defect region ``(1, 1/2), (R, 1), (1, 1/2)``."""
    del r  # the region does not depend on the background contrast

    def build(R: float) -> SegmentDefect:
        return SegmentDefect((Segment(1.0, 0.5), Segment(float(R), 1.0), Segment(1.0, 0.5)))

    return build


def gap_containing(background: UnitCell, omega: float, omega_max: float | None = None) -> tuple[float, float]:
    wmax = omega_max if omega_max is not None else max(2.0 * omega, 1.0)
    for lo, hi in dispersion_scan(background, wmax).gaps:
        if lo < omega < hi:
            return lo, hi
    raise DesignError(f"target omega={omega!r} is not inside a gap of the background")


def _nearest_mode(background, family, p, gap, target, n_grid):
    ws = mode_frequencies(BoundedDefect(background, family(p)), gap, n_grid)
    if not ws:
        return None
    return min(ws, key=lambda w: abs(w - target))


def solve_defect_for_frequency(background: UnitCell, family: DesignFamily, target_omega: float,
                               param_bracket: tuple[float, float], n_grid: int = DEFAULT_GRID,
                               omega_tol: float = OMEGA_TOL) -> float:
    """Defect parameter whose mode sits at ``target_omega``.

    Bisection on the parameter, assuming the mode frequency is monotone in it
    over ``param_bracket``.  The two ends must place the mode on opposite
    sides of the target; otherwise :class:`DesignError` reports the range the
    bracket actually reaches.
    """
    gap = gap_containing(background, target_omega)
    lo, hi = map(float, param_bracket)
    if not lo < hi:
        raise ValueError("param_bracket must be increasing")

    w_lo = _nearest_mode(background, family, lo, gap, target_omega, n_grid)
    w_hi = _nearest_mode(background, family, hi, gap, target_omega, n_grid)
    if w_lo is None or w_hi is None or (w_lo - target_omega) * (w_hi - target_omega) > 0:
        fmt = lambda w: "no mode" if w is None else f"{w:.9g}"
        raise DesignError(
            f"bracket [{lo:.9g}, {hi:.9g}] does not reach omega={target_omega:.9g}: "
            f"modes at the ends are {fmt(w_lo)} and {fmt(w_hi)} in gap ({gap[0]:.6g}, {gap[1]:.6g})"
        )
    if w_lo == target_omega:
        return lo
    if w_hi == target_omega:
        return hi

    def g(p):
        w = _nearest_mode(background, family, p, gap, target_omega, n_grid)
        if w is None:
            raise DesignError(f"mode vanished at parameter {p:.12g}; frequency not monotone in bracket")
        return w - target_omega

    p = bisect(g, lo, hi, PARAM_TOL * max(1.0, abs(hi)), f_lo=w_lo - target_omega)
    miss = abs(g(p))
    if miss > omega_tol:
        raise DesignError(f"bisection stalled at parameter {p:.12g} with |d omega| = {miss:.3g}")
    return p


def design_defect_for_frequency(background: UnitCell, family: DesignFamily, target_omega: float,
                                reference: float, span: float, n_scan: int = 64,
                                n_grid: int = DEFAULT_GRID) -> float:
    """Smallest change from ``reference`` that puts a mode on ``target_omega``.

    Steps outward from ``reference`` on both sides (staying positive), stops
    at the first parameter interval where the nearest mode crosses the target,
    and refines it with :func:`solve_defect_for_frequency`.  Of the two sides
    the solution closest to ``reference`` wins.
    """
    gap = gap_containing(background, target_omega)
    best = None
    for sign in (1.0, -1.0):
        steps = reference + sign * span * np.arange(1, n_scan + 1) / n_scan
        steps = steps[steps > 0]
        prev = None
        for p in steps:
            w = _nearest_mode(background, family, float(p), gap, target_omega, n_grid)
            if w is not None and prev is not None and (prev[1] - target_omega) * (w - target_omega) <= 0:
                bracket = tuple(sorted((prev[0], float(p))))
                sol = solve_defect_for_frequency(background, family, target_omega, bracket, n_grid)
                if best is None or abs(sol - reference) < abs(best - reference):
                    best = sol
                break
            prev = None if w is None else (float(p), w)
    if best is None:
        raise DesignError(
            f"no parameter within {span:.6g} of {reference:.6g} places a mode at omega={target_omega:.9g}"
        )
    return best


# -- composite devices ----------------------------------------------------------


def compose_rainbow(background: UnitCell, regions: Sequence[DefectRegion],
                    spacing_cells: int) -> SegmentDefect:
    """Join defect regions with ``spacing_cells`` background cells between neighbours.

    The result is one bounded defect whose ``sub_regions`` record where each
    original region sits, measured from the left end of the composite.
    """
    if spacing_cells < 1:
        raise ValueError("spacing_cells must be >= 1")
    if not regions:
        raise ValueError("at least one defect region is required")
    for reg in regions:
        if not isinstance(reg, SegmentDefect):
            raise TypeError("compose_rainbow needs piecewise-constant (SegmentDefect) regions")
    segments: list[Segment] = []
    subs = []
    x = 0.0
    for k, reg in enumerate(regions):
        if k:
            for _ in range(spacing_cells):
                segments.extend(background.segments)
            x += spacing_cells * background.period
        subs.append((x, x + reg.width))
        segments.extend(reg.segments)
        x += reg.width
    return SegmentDefect(tuple(segments), tuple(subs))


@dataclass
class RainbowDesign:
    targets: list[float]
    solved_params: list[float]
    spacing_cells: int
    verified_omegas: list[float]
    deviations: list[float]
    localised: list[bool]
    peak_positions: list[float]
    found_omegas: list[float]
    success: bool
    message: str = ""
    modes: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "targets": self.targets,
            "solved_params": self.solved_params,
            "spacing_cells": self.spacing_cells,
            "verified_omegas": self.verified_omegas,
            "deviations": self.deviations,
            "localised": self.localised,
            "peak_positions": self.peak_positions,
            "found_omegas": self.found_omegas,
            "success": self.success,
            "message": self.message,
        }


def verify_rainbow(background: UnitCell, composite: SegmentDefect, targets: Sequence[float],
                   solved_params: Sequence[float] = (), spacing_cells: int = 0,
                   tolerance: float = 2e-3, n_grid: int = DEFAULT_GRID) -> RainbowDesign:
    """Find the modes of a composite device and match them to their targets.

    Target ``i`` is expected to localise in ``composite.sub_regions[i]``.  The
    check locates the largest ``|u|`` sample of the reconstructed profile and
    asks whether it falls inside that sub-region.
    """
    targets = [float(t) for t in targets]
    medium = BoundedDefect(background, composite)
    found = []
    for gap in sorted({gap_containing(background, t) for t in targets}):
        found.extend(find_modes(medium, gap, n_grid))
    found.sort(key=lambda m: m.omega)
    found_w = [m.omega for m in found]

    verified, deviations, localised, peaks, chosen = [], [], [], [], []
    for i, t in enumerate(targets):
        if not found:
            break
        mode = min(found, key=lambda m: abs(m.omega - t))
        chosen.append(mode)
        verified.append(mode.omega)
        deviations.append(mode.omega - t)
        x, u = mode.profile[:, 0], mode.profile[:, 1]
        peak = float(x[int(np.argmax(np.abs(u)))])
        peaks.append(peak)
        if i < len(composite.sub_regions):
            a, b = composite.sub_regions[i]
            localised.append(bool(a <= peak <= b))
        else:
            localised.append(False)

    problems = []
    if len(found) < len(targets):
        problems.append(f"found {len(found)} modes for {len(targets)} targets: {found_w}")
    if len({id(m) for m in chosen}) < len(chosen):
        problems.append("two targets matched the same mode")
    bad = [t for t, dv in zip(targets, deviations) if abs(dv) > tolerance]
    if bad:
        problems.append(f"targets missed by more than {tolerance:g}: {bad}")
    if not all(localised):
        problems.append("a mode peaks outside its own defect")
    return RainbowDesign(targets, [float(p) for p in solved_params], int(spacing_cells),
                         verified, deviations, localised, peaks, found_w,
                         not problems, "; ".join(problems), chosen)


def design_rainbow(r: float, targets: Sequence[float], spacing_cells: int = 10,
                   params: Sequence[float] | None = None, span: float = 9.0) -> RainbowDesign:
    """Point-defect rainbow filter in the ``r`` background, one defect per target.

    With ``params`` given the defects are used as-is; otherwise each is found
    by :func:`design_defect_for_frequency` starting from the unperturbed
    value ``R = r``.
    """
    background = local_defect_cell(r)
    family = local_defect_family(r)
    if params is None:
        params = [design_defect_for_frequency(background, family, t, reference=r, span=span)
                  for t in targets]
    elif len(params) != len(targets):
        raise ValueError("one parameter per target is required")
    composite = compose_rainbow(background, [family(p) for p in params], spacing_cells)
    return verify_rainbow(background, composite, targets, params, spacing_cells)
