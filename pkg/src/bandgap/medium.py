"""Wave-speed profiles for one-dimensional periodic media with defects.

A profile is described by its slowness ``r = 1/c``.  Constant stretches are
:class:`Segment` objects; a period of the background is a :class:`UnitCell`.
Three medium layouts are supported:

* :class:`Periodic` -- a single unit cell repeated on the whole line;
* :class:`BoundedDefect` -- a background cell with a finite defect region
  inserted between mesh points ``x_0 = 0`` and ``x_1 = width``;
* :class:`Interface` -- one cell repeated for ``x < 0`` and another for
  ``x > 0``.

Media can be built from presets or read from / written to JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union
from urllib.parse import parse_qsl

import numpy as np

REL_TOL = 1e-12


class MediumError(ValueError):
    """Raised when a medium violates its structural invariants."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class Segment:
    slowness: float
    length: float

    def __post_init__(self):
        if not (self.slowness > 0 and math.isfinite(self.slowness)):
            raise MediumError(f"segment slowness must be > 0 (got {self.slowness})")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise MediumError(f"segment length must be > 0 (got {self.length})")


def _as_segments(items) -> tuple[Segment, ...]:
    out = []
    for item in items:
        out.append(item if isinstance(item, Segment) else Segment(*map(float, item)))
    return tuple(out)


def _is_palindrome(segments: Sequence[Segment], tol: float = REL_TOL) -> bool:
    n = len(segments)
    for a, b in zip(segments[: n // 2], reversed(segments)):
        if not math.isclose(a.slowness, b.slowness, rel_tol=tol, abs_tol=0.0):
            return False
        if not math.isclose(a.length, b.length, rel_tol=tol, abs_tol=0.0):
            return False
    return True


@dataclass(frozen=True)
class UnitCell:
    """One period of a piecewise-constant background, listed left to right."""

    segments: tuple[Segment, ...]
    period: float

    def __post_init__(self):
        object.__setattr__(self, "segments", _as_segments(self.segments))
        object.__setattr__(self, "period", float(self.period))

    @classmethod
    def from_segments(cls, segments) -> "UnitCell":
        segs = _as_segments(segments)
        return cls(segs, math.fsum(s.length for s in segs))

    @property
    def total_length(self) -> float:
        return math.fsum(s.length for s in self.segments)

    @property
    def is_symmetric(self) -> bool:
        return _is_palindrome(self.segments)

    def reversed(self) -> "UnitCell":
        return UnitCell(tuple(reversed(self.segments)), self.period)


@dataclass(frozen=True)
class SegmentDefect:
    """Piecewise-constant defect region.

    ``sub_regions`` optionally marks ``(start, end)`` spans of interest inside
    the region (used by composite multi-defect devices).
    """

    segments: tuple[Segment, ...]
    sub_regions: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", _as_segments(self.segments))
        object.__setattr__(
            self, "sub_regions", tuple((float(a), float(b)) for a, b in self.sub_regions)
        )
        if not self.segments:
            raise MediumError("defect region has no segments")

    @property
    def width(self) -> float:
        return math.fsum(s.length for s in self.segments)

    @property
    def is_symmetric(self) -> bool:
        return _is_palindrome(self.segments)

    def breakpoints(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.length for s in self.segments])])


@dataclass(frozen=True)
class SmoothDefect:
    """Defect region with a continuous wave speed between breakpoints.

    ``speed(x)`` is evaluated for ``0 <= x <= width`` (measured from the left
    edge of the region) and must accept numpy arrays.  The integrator never
    steps across an entry of ``breakpoints``.
    """

    speed: Callable[[np.ndarray], np.ndarray]
    width: float
    breakpoints: tuple[float, ...] = ()
    sub_regions: tuple[tuple[float, float], ...] = field(default=(), compare=False)

    def __post_init__(self):
        w = float(self.width)
        if not w > 0:
            raise MediumError(f"smooth defect width must be > 0 (got {self.width})")
        object.__setattr__(self, "width", w)
        inner = sorted({float(b) for b in self.breakpoints if 0.0 < float(b) < w})
        object.__setattr__(self, "breakpoints", tuple(inner))

    def pieces(self) -> list[tuple[float, float]]:
        edges = [0.0, *self.breakpoints, self.width]
        return list(zip(edges[:-1], edges[1:]))

    def quadrature_points(self, per_piece: int = 64) -> np.ndarray:
        return np.concatenate([np.linspace(a, b, per_piece) for a, b in self.pieces()])

    @property
    def is_symmetric(self) -> bool:
        x = self.quadrature_points()
        c = np.asarray(self.speed(x), dtype=float)
        c_rev = np.asarray(self.speed(self.width - x), dtype=float)
        return bool(np.allclose(c, c_rev, rtol=1e-12, atol=0.0))


DefectRegion = Union[SegmentDefect, SmoothDefect]


@dataclass(frozen=True)
class Periodic:
    cell: UnitCell


@dataclass(frozen=True)
class BoundedDefect:
    cell: UnitCell
    region: DefectRegion


@dataclass(frozen=True)
class Interface:
    left: UnitCell
    right: UnitCell


Medium = Union[Periodic, BoundedDefect, Interface]


# -- validation ---------------------------------------------------------------


def _cell_violations(cell: UnitCell, name: str) -> list[str]:
    out = []
    if not cell.segments:
        out.append(f"{name}: no segments")
        return out
    if not cell.period > 0:
        out.append(f"{name}: period must be > 0")
    elif not math.isclose(cell.total_length, cell.period, rel_tol=REL_TOL):
        out.append(
            f"{name}: segment lengths ≠ period "
            f"(sum {cell.total_length!r} vs period {cell.period!r})"
        )
    return out


def validate(m: Medium) -> list[str]:
    """Return a list of invariant violations; empty means the medium is valid."""
    if isinstance(m, Periodic):
        return _cell_violations(m.cell, "cell")
    if isinstance(m, BoundedDefect):
        out = _cell_violations(m.cell, "cell")
        if m.cell.segments and not m.cell.is_symmetric:
            out.append("cell: background cell not symmetric")
        region = m.region
        if isinstance(region, SmoothDefect):
            c = np.asarray(region.speed(region.quadrature_points()), dtype=float)
            if not np.all(np.isfinite(c)) or np.any(c <= 0):
                out.append("defect: speed must be > 0 at all quadrature points")
        return out
    if isinstance(m, Interface):
        out = _cell_violations(m.left, "left") + _cell_violations(m.right, "right")
        for name, cell in (("left", m.left), ("right", m.right)):
            if cell.segments and not cell.is_symmetric:
                out.append(f"{name}: interface cell not symmetric")
        if not math.isclose(m.left.period, m.right.period, rel_tol=REL_TOL):
            out.append("interface cells have different periods")
        return out
    return [f"unknown medium type {type(m).__name__}"]


def _checked(m: Medium) -> Medium:
    problems = validate(m)
    if problems:
        raise MediumError(problems)
    return m


def background_cell(m: Medium) -> UnitCell:
    """The cell repeated to the right of the defect (or the only cell)."""
    return m.right if isinstance(m, Interface) else m.cell


# -- presets ------------------------------------------------------------------


def _require_positive(**params):
    bad = [f"{k} > 0 (got {v})" for k, v in params.items() if not v > 0]
    if bad:
        raise MediumError([f"violated: {b}" for b in bad])


def local_defect_cell(r: float) -> UnitCell:
    return UnitCell(((1.0, 0.5), (r, 1.0), (1.0, 0.5)), 2.0)


def preset_local_defect(r: float, R: float) -> BoundedDefect:
    """Period-2 background with the middle inclusion of one cell changed to ``R``."""
    _require_positive(r=r, R=R)
    cell = local_defect_cell(float(r))
    region = SegmentDefect(local_defect_cell(float(R)).segments)
    return _checked(BoundedDefect(cell, region))


def _ssh_violations(r: float, d: float, a: float) -> list[str]:
    out = []
    if not r > 0:
        out.append(f"violated: r > 0 (got r={r})")
    if r == 1:
        out.append("violated: r != 1")
    if not 0 < a < 0.5:
        out.append(f"violated: 0 < a < 1/2 (got a={a})")
    if not a < d < 1 - a:
        out.append(f"violated: a < d < 1 - a (got a={a}, d={d})")
    return out


def ssh_segments(r: float, d: float, a: float, gap: float | None = None) -> tuple[Segment, ...]:
    """Segments of an SSH cell; ``gap`` overrides the central stretch length."""
    outer = (1 - d - a) / 2
    mid = d - a if gap is None else gap
    return _as_segments(((1.0, outer), (r, a), (1.0, mid), (r, a), (1.0, outer)))


def preset_ssh(r: float, d: float, a: float) -> Periodic:
    r, d, a = float(r), float(d), float(a)
    problems = _ssh_violations(r, d, a)
    if problems:
        raise MediumError(problems)
    return _checked(Periodic(UnitCell(ssh_segments(r, d, a), 1.0)))


def preset_ssh_dislocated(r: float, d: float, a: float, l: float) -> BoundedDefect:
    """SSH medium with one cell split at its centre by an extra length ``l``."""
    cell = preset_ssh(r, d, a).cell
    l = float(l)
    if not l >= 0:
        raise MediumError(f"violated: l >= 0 (got l={l})")
    region = SegmentDefect(ssh_segments(float(r), float(d), float(a), gap=float(d) - float(a) + l))
    return _checked(BoundedDefect(cell, region))


def preset_ssh_interface(r: float, a: float, eps: float) -> Interface:
    """SSH cells with ``d = 1/2 - eps`` on the left and ``d = 1/2 + eps`` on the right."""
    eps = float(eps)
    if not eps >= 0:
        raise MediumError(f"violated: eps >= 0 (got eps={eps})")
    problems = _ssh_violations(float(r), 0.5 - eps, float(a)) + _ssh_violations(
        float(r), 0.5 + eps, float(a)
    )
    if problems:
        raise MediumError(sorted(set(problems)))
    left = preset_ssh(r, 0.5 - eps, a).cell
    right = preset_ssh(r, 0.5 + eps, a).cell
    return _checked(Interface(left, right))


PRESETS = {
    "local_defect": preset_local_defect,
    "ssh": preset_ssh,
    "ssh_dislocated": preset_ssh_dislocated,
    "ssh_interface": preset_ssh_interface,
}


def from_preset(name: str, params: dict) -> Medium:
    key = name.replace("-", "_")
    if key not in PRESETS:
        raise MediumError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}")
    try:
        return PRESETS[key](**{k: float(v) for k, v in params.items()})
    except TypeError as exc:
        raise MediumError(f"preset {name!r}: {exc}") from None


# -- JSON description files ---------------------------------------------------


def _pairs(segments) -> list[list[float]]:
    return [[s.slowness, s.length] for s in segments]


def medium_to_dict(m: Medium) -> dict:
    if isinstance(m, Periodic):
        return {"cell": _pairs(m.cell.segments), "period": m.cell.period}
    if isinstance(m, BoundedDefect):
        if not isinstance(m.region, SegmentDefect):
            raise MediumError("smooth defect profiles cannot be serialised")
        out = {"cell": _pairs(m.cell.segments), "period": m.cell.period,
               "defect": _pairs(m.region.segments)}
        if m.region.sub_regions:
            out["sub_regions"] = [list(s) for s in m.region.sub_regions]
        return out
    if isinstance(m, Interface):
        return {"left": _pairs(m.left.segments), "right": _pairs(m.right.segments),
                "period": m.left.period}
    raise MediumError(f"unknown medium type {type(m).__name__}")


_EXPLICIT_KEYS = {"cell", "period", "defect", "sub_regions", "left", "right"}


def medium_from_dict(data: dict) -> Medium:
    if not isinstance(data, dict):
        raise MediumError("medium description must be a JSON object")
    if "preset" in data:
        extra = set(data) - {"preset", "params"}
        if extra:
            raise MediumError(f"unknown keys: {sorted(extra)}")
        return from_preset(data["preset"], data.get("params", {}))
    extra = set(data) - _EXPLICIT_KEYS
    if extra:
        raise MediumError(f"unknown keys: {sorted(extra)}")
    try:
        if "left" in data or "right" in data:
            period = data["period"]
            m = Interface(UnitCell(data["left"], period), UnitCell(data["right"], period))
        else:
            cell = UnitCell(data["cell"], data["period"])
            if "defect" in data:
                region = SegmentDefect(data["defect"], tuple(map(tuple, data.get("sub_regions", ()))))
                m = BoundedDefect(cell, region)
            else:
                m = Periodic(cell)
    except KeyError as exc:
        raise MediumError(f"missing key {exc.args[0]!r}") from None
    except TypeError as exc:
        raise MediumError(f"malformed segment list: {exc}") from None
    return _checked(m)


def parse_preset_spec(spec: str) -> Medium:
    """Parse ``"preset:ssh?r=10&d=0.25&a=0.1"``."""
    body = spec[len("preset:"):] if spec.startswith("preset:") else spec
    name, _, query = body.partition("?")
    params = {}
    for k, v in parse_qsl(query, keep_blank_values=True, strict_parsing=bool(query)):
        try:
            params[k] = float(v)
        except ValueError:
            raise MediumError(f"preset parameter {k}={v!r} is not a number") from None
    return from_preset(name, params)


def load_medium(source: str | Path) -> Medium:
    """Load a medium from a preset spec string or a JSON file path."""
    text = str(source)
    if text.startswith("preset:"):
        return parse_preset_spec(text)
    path = Path(source)
    if not path.exists():
        raise MediumError(f"medium file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MediumError(
            f"malformed JSON in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    return medium_from_dict(data)


def save_medium(m: Medium, path: str | Path) -> None:
    Path(path).write_text(json.dumps(medium_to_dict(m), indent=2) + "\n")
