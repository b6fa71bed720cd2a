"""Command-line entry point wiring the library into reproducible runs.

Every command validates its inputs up front (exit 2), runs the corresponding
module pipeline (numerical failures exit 3), writes data files atomically,
and drops a run-metadata JSON (inputs, package/library versions, wall time)
next to the outputs.  Data files carry no timestamps, so identical configs
reproduce byte-identical CSV bodies.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import KaleidoError, MassDomainError
from . import billiard as B
from . import exact as E
from . import geometry as G
from . import groups as GR
from . import masses as M
from . import stats as ST

THREAD_ENV = "KBILLIARDS_THREADS"

_COMMANDS = ("classify", "family", "geometry", "group", "exact", "billiard", "stats", "weyl")


@dataclass
class RunConfig:
    command: str
    masses: tuple | None = None
    ordering: tuple | None = None
    spec: str | None = None
    n_max: int = 40
    n_max_grid: tuple | None = None
    quadrature_order: int | None = None
    k_levels: int = 50
    lambda_max: int = 45
    e_max: float = 25.0
    bins: int = 24
    grid: int = 100
    r_min: float | None = None
    r_max: float | None = None
    tol_spacings: float = 0.05
    ground_state_path: str | None = None
    output_path: str | None = None
    format: str = "csv"
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# helpers


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _capture_file(write_fn) -> str:
    """Run a path-writing helper into a string for atomic emission."""
    fd, tmp = tempfile.mkstemp(suffix=".tmp")
    os.close(fd)
    try:
        write_fn(tmp)
        with open(tmp) as fh:
            return fh.read()
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _write_metadata(base_path: str, config: RunConfig, wall: float, extra=None) -> None:
    meta = {
        "command": config.command,
        "inputs": {
            "masses": list(config.masses) if config.masses else None,
            "ordering": list(config.ordering) if config.ordering else None,
            "spec": config.spec,
            "n_max": config.n_max,
            "n_max_grid": list(config.n_max_grid) if config.n_max_grid else None,
            "quadrature_order": config.quadrature_order,
            "k_levels": config.k_levels,
            "lambda_max": config.lambda_max,
            "e_max": config.e_max,
            "bins": config.bins,
            "grid": config.grid,
            "tol_spacings": config.tol_spacings,
        },
        "versions": {
            "kaleidobilliards": __version__,
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
        },
        "wall_time_s": round(wall, 3),
    }
    if extra:
        meta.update(extra)
    if os.path.isdir(base_path):
        target = os.path.join(base_path, "run_metadata.json")
    else:
        target = base_path + ".meta.json"
    _atomic_write(target, json.dumps(meta, indent=2) + "\n")


def distinct_sector_orderings(masses: M.MassSequence, digits: int = 12) -> list:
    """Representative ordering + multiplicity per congruence class.

    Orderings are congruent when their mass sequences are equal (equal-mass
    relabeling) or reversed (inversion).
    """
    groups: dict = {}
    for perm in itertools.permutations(range(1, len(masses) + 1)):
        seq = tuple(round(masses.masses[p - 1], digits) for p in perm)
        sig = min(seq, seq[::-1])
        groups.setdefault(sig, []).append(perm)
    return sorted((min(v), len(v)) for v in groups.values())


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise SystemExit2(message)


class SystemExit2(Exception):
    """Validation failure; mapped to exit code 2."""


# ---------------------------------------------------------------------------
# command implementations


def _cmd_classify(config: RunConfig) -> dict:
    seq = M.MassSequence(config.masses)
    result = M.classify(seq)
    integrable = result.max_deviation < 1e-10
    line = (
        f"{result.best.name} bracket {list(result.best.bracket)} "
        f"max deviation {result.max_deviation:.6e} rad "
        f"({'integrable' if integrable else 'not integrable'} in this order)"
    )
    print(line)
    if config.output_path:
        payload = {
            "masses": list(seq.masses),
            "best": result.best.name,
            "bracket": list(result.best.bracket),
            "reversed_bracket": result.reversed_bracket,
            "measured_angles": [float(f"{a:.12g}") for a in result.measured_angles],
            "target_angles": [float(f"{a:.12g}") for a in result.target_angles],
            "max_deviation": float(f"{result.max_deviation:.12g}"),
            "integrable": integrable,
        }
        _atomic_write(config.output_path, json.dumps(payload, indent=2) + "\n")
    return {}


def _cmd_family(config: RunConfig) -> dict:
    spec = M.coxeter_spec(config.spec)
    lo, hi = M.feasibility_interval(spec)
    r_min = config.r_min if config.r_min is not None else hi * 1e-3
    r_max = config.r_max if config.r_max is not None else hi * (1.0 - 1e-6)
    ratios = np.linspace(r_min, r_max, config.grid)
    curve = M.family_curve(spec, ratios)
    _atomic_write(config.output_path, _capture_file(lambda p: M.write_family_csv(curve, p)))
    return {
        "feasible_interval": [float(f"{lo:.12g}"), float(f"{hi:.12g}")],
        "n_points": len(curve.points),
        "infeasible_points": [[r, reason] for r, reason in curve.infeasible],
    }


def _cmd_geometry(config: RunConfig) -> dict:
    seq = M.MassSequence(config.masses)
    geom = G.sector_geometry(G.coincidence_normals(seq), config.ordering)
    _atomic_write(config.output_path, G.geometry_to_json(geom) + "\n")
    return {}


def _cmd_group(config: RunConfig) -> dict:
    if config.masses:
        seq = M.MassSequence(config.masses)
    else:
        spec = M.coxeter_spec(config.spec)
        _require(spec.rank == 3, "group generation needs a rank-3 spec or masses")
        lo, hi = M.feasibility_interval(spec)
        seq = M.generate_family(spec, 1.0, 0.5 * hi)
    grp = GR.group_from_masses(seq)
    _atomic_write(config.output_path, GR.group_to_json(grp) + "\n")
    return {}


def _cmd_exact(config: RunConfig) -> dict:
    spec = M.coxeter_spec(config.spec)
    levels = E.energy_levels(spec, config.e_max, spec.rank + 1)
    _atomic_write(config.output_path, _capture_file(lambda p: E.levels_to_csv(levels, p)))
    extra = {
        "n_levels": len(levels),
        "lambda_spectrum": {
            str(k): v for k, v in GR.lambda_spectrum(spec, config.lambda_max).items()
        },
    }
    if config.ground_state_path:
        _require(spec.rank == 3, "ground-state polynomial needs a rank-3 spec")
        lo, hi = M.feasibility_interval(spec)
        grp = GR.group_from_masses(M.generate_family(spec, 1.0, 0.5 * hi))
        state = E.ground_state(grp)
        _atomic_write(config.ground_state_path, state.polynomial.to_json() + "\n")
        extra["ground_state_degree"] = state.polynomial.degree
    return extra


def _solve_for_cli(config: RunConfig, sector):
    if config.n_max_grid:
        study = B.convergence_study(
            sector,
            config.n_max_grid,
            config.k_levels,
            quadrature_order=config.quadrature_order,
        )
        return study.final, study.last_deltas
    spectrum = B.solve_sector(
        sector, config.n_max, config.k_levels, config.quadrature_order
    )
    return spectrum, None


def _cmd_billiard(config: RunConfig) -> dict:
    seq = M.MassSequence(config.masses)
    sector = B.flatten_sector(seq, config.ordering)
    spectrum, deltas = _solve_for_cli(config, sector)
    _atomic_write(
        config.output_path,
        _capture_file(lambda p: B.spectrum_to_csv(spectrum, p, deltas)),
    )
    return {
        "area": float(f"{sector.geometry.area:.12g}"),
        "perimeter": float(f"{sector.geometry.perimeter:.12g}"),
        "n_levels": len(spectrum.values),
        "first_lambda_eff": float(f"{spectrum.effective_lambda[0]:.12g}"),
    }


def _cmd_weyl(config: RunConfig) -> dict:
    seq = M.MassSequence(config.masses)
    sector = B.flatten_sector(seq, config.ordering)
    spectrum, _ = _solve_for_cli(config, sector)
    e, stair, weyl, after, before = ST.weyl_residuals(spectrum, sector.geometry)
    lines = ["k,eigenvalue,staircase,weyl,residual"]
    for i in range(len(e)):
        lines.append(
            f"{i + 1},{e[i]:.12g},{stair[i]:.12g},{weyl[i]:.12g},{after[i]:.12g}"
        )
    _atomic_write(config.output_path, "\n".join(lines) + "\n")
    return {"max_abs_residual": float(f"{np.abs(after).max():.12g}")}


def _stats_one_sector(seq, perm, config: RunConfig):
    geom = G.sector_geometry(G.coincidence_normals(seq), perm)
    sector = B.sector_from_inward_normals(geom.bounding_normals, label=perm)
    spacing = 4.0 * math.pi / geom.area
    grid = config.n_max_grid if config.n_max_grid else (config.n_max - 10, config.n_max)
    study = B.convergence_study(
        sector,
        grid,
        config.k_levels,
        tolerance=config.tol_spacings * spacing,
        quadrature_order=config.quadrature_order,
    )
    spectrum = study.final
    unfolded = ST.unfold(spectrum, geom)
    hist = ST.spacing_histogram(unfolded, bins=config.bins)
    return geom, study, spectrum, unfolded, hist


def _cmd_stats(config: RunConfig) -> dict:
    seq = M.MassSequence(config.masses)
    out_dir = config.output_path
    os.makedirs(out_dir, exist_ok=True)
    sectors = distinct_sector_orderings(seq)
    workers = max(1, int(os.environ.get(THREAD_ENV, "1")))
    summary = {}

    def run(entry):
        perm, mult = entry
        return perm, mult, _stats_one_sector(seq, perm, config)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, sectors))
    else:
        results = [run(entry) for entry in sectors]

    for perm, mult, (geom, study, spectrum, unfolded, hist) in results:
        tag = "".join(str(p) for p in perm)
        sub = os.path.join(out_dir, f"sector_{tag}")
        os.makedirs(sub, exist_ok=True)
        _atomic_write(
            os.path.join(sub, "spectrum.csv"),
            _capture_file(lambda p: B.spectrum_to_csv(spectrum, p, study.last_deltas)),
        )
        _atomic_write(
            os.path.join(sub, "histogram.csv"),
            _capture_file(lambda p: ST.histogram_to_csv(hist, p)),
        )
        _atomic_write(
            os.path.join(sub, "reference.csv"),
            _capture_file(lambda p: ST.reference_curves_to_csv(p)),
        )
        e, stair, weyl, after, _ = ST.weyl_residuals(spectrum, geom)
        lines = ["k,eigenvalue,staircase,weyl,residual"]
        for i in range(len(e)):
            lines.append(
                f"{i + 1},{e[i]:.12g},{stair[i]:.12g},{weyl[i]:.12g},{after[i]:.12g}"
            )
        _atomic_write(os.path.join(sub, "weyl_residual.csv"), "\n".join(lines) + "\n")
        _atomic_write(
            os.path.join(sub, "summary.json"), ST.summary_to_json(hist, unfolded) + "\n"
        )
        summary[tag] = {
            "multiplicity": mult,
            "area": float(f"{geom.area:.12g}"),
            "converged_levels": spectrum.converged_count,
            "ks_poisson": float(f"{hist.ks_poisson:.12g}"),
            "ks_wigner": float(f"{hist.ks_wigner:.12g}"),
        }
    _atomic_write(
        os.path.join(out_dir, "sectors.json"), json.dumps(summary, indent=2) + "\n"
    )
    return {"n_sectors": len(sectors)}


_IMPLEMENTATIONS = {
    "classify": _cmd_classify,
    "family": _cmd_family,
    "geometry": _cmd_geometry,
    "group": _cmd_group,
    "exact": _cmd_exact,
    "billiard": _cmd_billiard,
    "stats": _cmd_stats,
    "weyl": _cmd_weyl,
}


# ---------------------------------------------------------------------------
# validation and dispatch


def _validate(config: RunConfig) -> None:
    _require(config.command in _COMMANDS, f"unknown command {config.command!r}")
    needs_masses = {"geometry", "billiard", "stats", "weyl", "classify"}
    needs_output = {"family", "geometry", "group", "exact", "billiard", "stats", "weyl"}
    if config.command in needs_masses:
        _require(config.masses is not None, f"{config.command} requires --masses")
        try:
            M.MassSequence(config.masses)
        except MassDomainError as exc:
            raise SystemExit2(str(exc)) from exc
        if config.command != "classify":
            _require(
                len(config.masses) == 4,
                f"{config.command} supports exactly four masses",
            )
    if config.command == "group" and config.masses is not None:
        _require(len(config.masses) == 4, "group generation needs four masses")
    if config.command in {"geometry", "billiard", "weyl"}:
        _require(config.ordering is not None, f"{config.command} requires --ordering")
        _require(
            config.masses is not None and len(config.ordering) == len(config.masses),
            "ordering length must match the number of masses",
        )
    if config.command in {"family", "exact"}:
        _require(config.spec is not None, f"{config.command} requires --spec")
        try:
            M.coxeter_spec(config.spec)
        except ValueError as exc:
            raise SystemExit2(str(exc)) from exc
    if config.command == "group":
        _require(
            config.spec is not None or config.masses is not None,
            "group requires --spec or --masses",
        )
    if config.command in needs_output:
        _require(config.output_path is not None, f"{config.command} requires --output")
    _require(config.format in ("csv", "json"), "format must be csv or json")
    if config.n_max_grid is not None:
        _require(
            all(b > a for a, b in zip(config.n_max_grid, config.n_max_grid[1:])),
            "--n-max-grid must be strictly ascending",
        )


def dispatch(config: RunConfig) -> int:
    """Validate, run, and write artifacts; returns the process exit code."""
    try:
        _validate(config)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    start = time.perf_counter()
    try:
        extra = _IMPLEMENTATIONS[config.command](config)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KaleidoError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    wall = time.perf_counter() - start
    if config.output_path:
        _write_metadata(config.output_path, config, wall, extra)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _parse_masses(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad mass list {text!r}") from exc


def _parse_ints(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kbilliards",
        description=(
            "Integrable mass families of trapped hard-core particles and "
            "spherical-triangle quantum billiards"
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, masses=False, ordering=False, spec=False, solver=False, output=True):
        if masses:
            p.add_argument("--masses", type=_parse_masses, default=None,
                           help="comma-separated positive masses")
        if ordering:
            p.add_argument("--ordering", type=_parse_ints, default=None,
                           help="1-based particle ordering, e.g. 1,3,4,2")
        if spec:
            p.add_argument("--spec", default=None,
                           help="group name: A3, C3, H3, I2(7), ...")
        if solver:
            p.add_argument("--n-max", type=int, default=None,
                           help="basis truncation (default 40)")
            p.add_argument("--n-max-grid", type=_parse_ints, default=None,
                           help="ascending truncations for convergence deltas")
            p.add_argument("--quadrature-order", type=int, default=None,
                           help="Gauss-Legendre order per direction (default 3*n_max)")
            p.add_argument("--k", dest="k_levels", type=int, default=None,
                           help="number of levels to report (default 50)")
        if output:
            p.add_argument("--output", dest="output_path", default=None,
                           help="output file (or directory for stats)")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--config", default=None, help="JSON config file")

    p = sub.add_parser("classify", help="score an ordered mass sequence")
    common(p, masses=True, output=True)

    p = sub.add_parser("family", help="one-parameter integrable mass family CSV")
    common(p, spec=True)
    p.add_argument("--grid", type=int, default=None, help="number of ratio grid points")
    p.add_argument("--r-min", type=float, default=None)
    p.add_argument("--r-max", type=float, default=None)

    p = sub.add_parser("geometry", help="sector geometry JSON")
    common(p, masses=True, ordering=True)

    p = sub.add_parser("group", help="reflection group data JSON")
    common(p, masses=True, spec=True)

    p = sub.add_parser("exact", help="algebraic energy ladder CSV")
    common(p, spec=True)
    p.add_argument("--e-max", type=float, default=None, help="energy cutoff")
    p.add_argument("--lambda-max", type=int, default=None)
    p.add_argument("--ground-state", dest="ground_state_path", default=None,
                   help="also write the ground-state polynomial JSON here")

    p = sub.add_parser("billiard", help="numerical sector spectrum CSV")
    common(p, masses=True, ordering=True, solver=True)

    p = sub.add_parser("weyl", help="staircase vs Weyl-law residual CSV")
    common(p, masses=True, ordering=True, solver=True)

    p = sub.add_parser("stats", help="per-sector level statistics (six-sector pipeline)")
    common(p, masses=True, solver=True)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--tol-spacings", type=float, default=None,
                   help="converged-window tolerance in mean spacings (default 0.05)")

    return parser


_DEFAULTS = {
    "n_max": 40,
    "k_levels": 50,
    "lambda_max": 45,
    "e_max": 25.0,
    "bins": 24,
    "grid": 100,
    "tol_spacings": 0.05,
    "format": "csv",
}


def _merge_config(args: argparse.Namespace) -> RunConfig:
    values = {k: v for k, v in vars(args).items() if k not in ("config",)}
    file_values = {}
    if args.config:
        with open(args.config) as fh:
            document = json.load(fh)
        file_values = document.get(args.command, {})
        file_values.update({k: v for k, v in document.items() if not isinstance(v, dict)})
    merged = {}
    for key, val in values.items():
        if val is None and key in file_values:
            val = file_values[key]
        if val is None and key in _DEFAULTS:
            val = _DEFAULTS[key]
        merged[key] = val
    for key in ("masses", "ordering", "n_max_grid"):
        if merged.get(key) is not None:
            merged[key] = tuple(merged[key])
    return RunConfig(**merged)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = _merge_config(args)
    return dispatch(config)


if __name__ == "__main__":
    sys.exit(main())
