"""Command-line front end: ``bandgap <subcommand> [options]``.

Data files are written atomically and depend only on the inputs, so reruns
give byte-identical output.  Provenance (version, time, full configuration)
goes to a separate ``metadata.json``.  A one-line JSON summary is printed to
standard output.

Exit status: 0 success, 2 invalid input, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, reproduce
from .defect import DEFAULT_GRID, ROOT_TOL, find_modes
from .design import default_l_grid, design_rainbow, sweep_dislocation
from .hfh import (EnvelopeError, envelope_asymmetric_bounded, envelope_interface,
                  envelope_symmetric_bounded, predict_profile)
from .medium import BoundedDefect, Interface, MediumError, Periodic, background_cell, load_medium
from .spectrum import band_edges, common_gaps, dispersion_scan

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3

SUBCOMMANDS = ("bands", "gaps", "modes", "envelope", "sweep-dislocation",
               "design-rainbow", "reproduce")
REPRODUCE_TARGETS = ("point-defect", "dislocation", "interface", "rainbow")
TOLERANCE_KEYS = {"grid", "tol_omega"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    medium_path: str | None = None
    omega_max: float = 1.0
    output_dir: str = "."
    format: str = "csv"
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        if "subcommand" not in data:
            raise ConfigError("missing key 'subcommand'")
        cfg = cls(**data)
        if cfg.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {cfg.subcommand!r}")
        if cfg.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {cfg.format!r}")
        bad = set(cfg.tolerances) - TOLERANCE_KEYS
        if bad:
            raise ConfigError(f"unknown tolerance overrides: {sorted(bad)}")
        if not cfg.omega_max > 0:
            raise ConfigError("omega_max must be > 0")
        return cfg

    @property
    def grid(self) -> int:
        return int(self.tolerances.get("grid") or DEFAULT_GRID)

    @property
    def tol_omega(self) -> float:
        return float(self.tolerances.get("tol_omega") or ROOT_TOL)


# -- output helpers ----------------------------------------------------------------


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) for v in row])
    return buf.getvalue()


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _json_text(obj) -> str:
    # repr of a float already round-trips, so no precision is lost here.
    return json.dumps(_to_jsonable(obj), indent=2, sort_keys=True) + "\n"


class _Outputs:
    def __init__(self, root: str):
        self.root = Path(root)
        self.files: list[str] = []

    def write(self, name: str, text: str) -> None:
        _atomic_write(self.root / name, text)
        self.files.append(str(self.root / name))


def _profile_csv(mode) -> str:
    return _csv_text(("x", "u", "du"), mode.profile)


# -- subcommands ---------------------------------------------------------------------


def _medium(cfg: RunConfig):
    if not cfg.medium_path:
        raise ConfigError("--medium is required for this subcommand")
    return load_medium(cfg.medium_path)


def _gap_of(cfg: RunConfig, medium):
    idx = int(cfg.options.get("gap_index", 0))
    if isinstance(medium, Interface):
        gaps = common_gaps(medium.left, medium.right, cfg.omega_max)
        if not 0 <= idx < len(gaps):
            raise IndexError(f"common gap index {idx} out of range (found {len(gaps)})")
        return gaps[idx]
    bs = dispersion_scan(background_cell(medium), cfg.omega_max)
    return band_edges(bs, idx)


def _cmd_bands(cfg, out):
    medium = _medium(cfg)
    bs = dispersion_scan(background_cell(medium), cfg.omega_max)
    rows = list(bs.samples())
    if cfg.format == "csv":
        out.write("bands.csv", _csv_text(("omega", "half_trace", "alpha"), rows))
    else:
        out.write("bands.json", _json_text(
            {"omega": bs.omega, "half_trace": bs.half_trace,
             "alpha": [a for _, _, a in rows], "gaps": bs.gaps, "bands": bs.bands}))
    return {"samples": len(rows), "gaps": len(bs.gaps), "open_top": bs.open_top}


def _cmd_gaps(cfg, out):
    medium = _medium(cfg)
    if isinstance(medium, Interface):
        gaps = common_gaps(medium.left, medium.right, cfg.omega_max)
    else:
        gaps = dispersion_scan(background_cell(medium), cfg.omega_max).gaps
    if cfg.format == "csv":
        out.write("gaps.csv", _csv_text(("lower", "upper"), gaps))
    else:
        out.write("gaps.json", _json_text([{"lower": lo, "upper": hi} for lo, hi in gaps]))
    return {"gaps": [[lo, hi] for lo, hi in gaps]}


def _cmd_modes(cfg, out):
    medium = _medium(cfg)
    if isinstance(medium, Periodic):
        raise ConfigError("a periodic medium has no defect modes")
    gap = _gap_of(cfg, medium)
    modes = find_modes(medium, gap, cfg.grid, cfg.tol_omega)
    table = [{"omega": m.omega, "decay_left": m.decay_left, "decay_right": m.decay_right}
             for m in modes]
    if cfg.format == "csv":
        out.write("modes.csv", _csv_text(("omega", "decay_left", "decay_right"),
                                         [(t["omega"], t["decay_left"], t["decay_right"]) for t in table]))
    else:
        out.write("modes.json", _json_text({"gap": gap, "modes": table}))
    for k, m in enumerate(modes):
        out.write(f"mode_{k}.csv", _profile_csv(m))
    return {"gap": list(gap), "omegas": [m.omega for m in modes]}


def _cmd_envelope(cfg, out):
    medium = _medium(cfg)
    n_cells = int(cfg.options.get("n_cells", 20))
    envelopes, errors = [], {}
    if isinstance(medium, Interface):
        gap = _gap_of(cfg, medium)
        omega0 = cfg.options.get("omega0")
        if omega0 is None:
            modes = find_modes(medium, gap, cfg.grid, cfg.tol_omega)
            if len(modes) != 1:
                raise ConfigError(f"expected one interface mode to anchor the expansion, "
                                  f"found {len(modes)}; pass --omega0")
            omega0 = modes[0].omega
        envelopes.append(envelope_interface(medium.left, medium.right, float(omega0)))
    elif isinstance(medium, BoundedDefect):
        gap = _gap_of(cfg, medium)
        which = cfg.options.get("edge", "both")
        for name, w in (("lower", gap[0]), ("upper", gap[1])):
            if which not in ("both", name):
                continue
            try:
                if medium.region.is_symmetric:
                    envelopes.append(envelope_symmetric_bounded(medium.cell, medium.region, w))
                else:
                    envelopes.append(envelope_asymmetric_bounded(medium.cell, medium.region, w)[0])
            except EnvelopeError as exc:
                errors[name] = str(exc)
        if not envelopes:
            raise EnvelopeError("; ".join(f"{k}: {v}" for k, v in errors.items()))
    else:
        raise ConfigError("a periodic medium has no defect envelope")

    payload = {"envelopes": [e.to_dict() for e in envelopes], "rejected": errors}
    out.write("envelope.json", _json_text(payload))
    if cfg.format == "csv":
        for k, e in enumerate(envelopes):
            prof = predict_profile(e, range(-n_cells, n_cells + 1))
            out.write(f"envelope_{k}.csv", _csv_text(("n", "envelope"), prof))
    return {"coefficients": [e.coefficient for e in envelopes], "rejected": sorted(errors)}


def _cmd_sweep(cfg, out):
    o = cfg.options
    step = float(o.get("l_step", 0.05))
    l_max = float(o.get("l_max", 25.0))
    res = sweep_dislocation(float(o.get("r", 10.0)), float(o.get("d", 0.25)), float(o.get("a", 0.1)),
                            default_l_grid(step, l_max), int(o.get("gap_index", 0)),
                            cfg.grid, cfg.tol_omega)
    out.write("sweep.csv", _csv_text(("l", "omega", "curve_id"), res.rows()))
    if res.errors:
        out.write("sweep_errors.json", _json_text(res.errors))
    return {"gap": list(res.gap), "curves": len(res.curves), "failed_points": len(res.errors)}


def _cmd_rainbow(cfg, out):
    o = cfg.options
    targets = [float(t) for t in o.get("targets", [0.2, 0.3])]
    params = o.get("params")
    design = design_rainbow(float(o.get("r", 10.0)), targets, int(o.get("spacing", 10)),
                            None if params is None else [float(p) for p in params])
    out.write("rainbow.json", _json_text(design.to_dict()))
    for k, m in enumerate(design.modes):
        out.write(f"rainbow_mode_{k}.csv", _profile_csv(m))
    return {"success": design.success, "solved_params": design.solved_params,
            "verified_omegas": design.verified_omegas}


def _passes(obj) -> list[bool]:
    found = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            if (k == "pass" or k.endswith("_pass") or k in ("one_mode", "hfh_at_least_tm", "success")) \
                    and isinstance(v, bool):
                found.append(v)
            else:
                found.extend(_passes(v))
    elif isinstance(obj, list):
        for v in obj:
            found.extend(_passes(v))
    return found


def _cmd_reproduce(cfg, out):
    target = cfg.options.get("target")
    funcs = {"point-defect": reproduce.point_defect, "dislocation": reproduce.dislocation,
             "interface": reproduce.interface, "rainbow": reproduce.rainbow}
    if target not in funcs:
        raise ConfigError(f"reproduce target must be one of {', '.join(REPRODUCE_TARGETS)}")
    result = funcs[target]()
    if target == "rainbow":
        # Only the designed device counts; the reference-R device is context.
        checks = _passes({k: v for k, v in result.items() if k != "device_with_reference_R"})
    else:
        checks = _passes(result)
    out.write(f"reproduce_{target.replace('-', '_')}.json", _json_text(result))
    return {"target": target, "checks": len(checks), "passed": sum(checks),
            "all_pass": all(checks)}


HANDLERS = {
    "bands": _cmd_bands, "gaps": _cmd_gaps, "modes": _cmd_modes, "envelope": _cmd_envelope,
    "sweep-dislocation": _cmd_sweep, "design-rainbow": _cmd_rainbow, "reproduce": _cmd_reproduce,
}


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute one configuration; returns the exit status."""
    stdout = stdout or sys.stdout
    out = _Outputs(cfg.output_dir)
    summary: dict[str, Any] = {"subcommand": cfg.subcommand}
    try:
        summary.update(HANDLERS[cfg.subcommand](cfg, out))
        status = EXIT_OK
    except (ConfigError, MediumError, IndexError, FileNotFoundError, ValueError) as exc:
        summary["error"] = f"{type(exc).__name__}: {exc}"
        status = EXIT_INVALID
    except (RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        summary["error"] = f"{type(exc).__name__}: {exc}"
        status = EXIT_SOLVER
    summary["status"] = status
    summary["files"] = out.files
    if status == EXIT_OK:
        meta = {"version": __version__, "created_unix": time.time(), "config": asdict(cfg),
                "files": [Path(f).name for f in out.files]}
        _atomic_write(Path(cfg.output_dir) / "metadata.json", _json_text(meta))
    print(json.dumps(_to_jsonable(summary), sort_keys=True), file=stdout)
    return status


# -- argument parsing -----------------------------------------------------------------


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="table format for data files (default: csv)")
    common.add_argument("--omega-max", type=float, default=1.0,
                        help="upper end of the frequency scan (default: 1.0)")
    common.add_argument("--grid", type=int, default=None,
                        help=f"points in the mode-condition scan (default: {DEFAULT_GRID})")
    common.add_argument("--tol-omega", type=float, default=None,
                        help=f"root bracket width for mode frequencies (default: {ROOT_TOL:g})")

    medium = argparse.ArgumentParser(add_help=False)
    medium.add_argument("--medium", required=True,
                        help="JSON medium file or preset spec such as 'preset:ssh?r=10&d=0.25&a=0.1'")
    gap = argparse.ArgumentParser(add_help=False)
    gap.add_argument("--gap-index", type=int, default=0, help="which gap, counting from 0")

    p = argparse.ArgumentParser(
        prog="bandgap",
        description="Band gaps, defect modes and envelopes of 1D periodic media.",
        epilog="Environment: BANDGAP_THREADS sets worker processes for sweeps (default 1). "
               "Exit status: 0 ok, 2 invalid input, 3 solver failure.",
    )
    sub = p.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    sub.add_parser("bands", parents=[common, medium], help="dispersion table: omega, tr T/2, Bloch alpha")
    sub.add_parser("gaps", parents=[common, medium], help="list of band gaps (common gaps for interfaces)")
    sub.add_parser("modes", parents=[common, medium, gap], help="localised modes in one gap, with profiles")
    e = sub.add_parser("envelope", parents=[common, medium, gap], help="homogenised decay envelope")
    e.add_argument("--edge", choices=("lower", "upper", "both"), default="both",
                   help="band edge to expand about (bounded defects)")
    e.add_argument("--omega0", type=float, default=None,
                   help="expansion frequency for interfaces (default: the interface mode)")
    e.add_argument("--n-cells", type=int, default=20, help="half-width of the envelope table in cells")

    s = sub.add_parser("sweep-dislocation", parents=[common, gap], help="mode curves against dislocation length")
    s.add_argument("--r", type=float, default=10.0)
    s.add_argument("--d", type=float, default=0.25)
    s.add_argument("--a", type=float, default=0.1)
    s.add_argument("--l-step", type=float, default=0.05, help="step in l (default: 0.05)")
    s.add_argument("--l-max", type=float, default=25.0, help="largest l (default: 25)")

    r = sub.add_parser("design-rainbow", parents=[common], help="solve and verify a point-defect rainbow filter")
    r.add_argument("--r", type=float, default=10.0, help="background contrast")
    r.add_argument("--targets", type=_float_list, default=[0.2, 0.3], help="comma-separated target frequencies")
    r.add_argument("--spacing", type=int, default=10, help="background cells between defects")
    r.add_argument("--params", type=_float_list, default=None,
                   help="use these defect contrasts instead of solving for them")

    rp = sub.add_parser("reproduce", parents=[common], help="recompute a reference example")
    rp.add_argument("target", choices=REPRODUCE_TARGETS)
    return p


_OPTION_KEYS = ("gap_index", "edge", "omega0", "n_cells", "r", "d", "a", "l_step", "l_max",
                "targets", "spacing", "params", "target")


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    options = {k: getattr(ns, k) for k in _OPTION_KEYS if hasattr(ns, k)}
    tolerances = {k: v for k, v in (("grid", ns.grid), ("tol_omega", ns.tol_omega)) if v is not None}
    return RunConfig.from_dict({
        "subcommand": ns.subcommand,
        "medium_path": getattr(ns, "medium", None),
        "omega_max": ns.omega_max,
        "output_dir": ns.out,
        "format": ns.format,
        "tolerances": tolerances,
        "options": options,
    })


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        cfg = config_from_args(ns)
    except ConfigError as exc:
        print(json.dumps({"subcommand": ns.subcommand, "status": EXIT_INVALID, "error": str(exc)}))
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
