"""Command line driver: ``meanfield {solve,sweep,diagnose,eigen}``.

Exit codes: 0 success/converged, 2 no negative-energy endpoint,
3 iteration budget exhausted (or eigensolver failure), 4 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .diagnostics import concentration, exp_mass, lambda_rho_gate, moser_trudinger_deficit
from .errors import ConvergenceError, FieldFormatError, InvalidArgumentError, MeanFieldError, NoNegativeEndpointError
from .functional import InteractionParams, evaluate, residual_norm
from .manifold import ScalarField, TorusGrid, WeightField, first_eigenvalue, read_field, weight_preset, write_field
from .mountain_pass import (
    BUDGET_EXHAUSTED,
    CONVERGED,
    NO_NEGATIVE_ENDPOINT,
    MountainPassResult,
    SolverConfig,
    solve,
)

EXIT_OK = 0
EXIT_NO_ENDPOINT = 2
EXIT_BUDGET = 3
EXIT_CONFIG = 4

TRAJECTORY_HEADER = ["iteration", "energy", "residual", "ln_z1", "ln_z2"]
SWEEP_HEADER = ["alpha1", "alpha2", "in_lambda_rho", "status", "c", "residual", "sup_v", "max_mass_fraction"]
CONFIG_KEYS = {"grid", "weight", "params", "sweep", "solver", "output", "formats"}
FORMATS = ("json", "csv", "field")
PRESETS = ("const:", "cosine:", "bump:")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are configuration errors, not solver outcomes
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    L: float = 2.0 * math.pi
    N: int = 64
    weight: str = "const:1"
    params: dict | None = None
    sweep: dict | None = None
    solver: dict = field(default_factory=dict)
    output: str | None = None
    formats: list = field(default_factory=lambda: list(FORMATS))
    jobs: int | None = None

    def grid(self) -> TorusGrid:
        try:
            return TorusGrid(self.L, self.N)
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc)) from exc

    def weight_field(self, grid: TorusGrid) -> WeightField:
        try:
            if self.weight.startswith(PRESETS):
                return weight_preset(grid, self.weight)
            path = Path(self.weight)
            if not path.is_file():
                raise ConfigError(f"weight file not found: {self.weight}")
            rho = read_field(path)
            if rho.grid != grid:
                raise ConfigError(f"weight file grid {rho.grid} does not match run grid {grid}")
            return WeightField(rho)
        except (InvalidArgumentError, FieldFormatError) as exc:
            raise ConfigError(str(exc)) from exc

    def solver_config(self) -> SolverConfig:
        known = {f.name for f in fields(SolverConfig)}
        unknown = set(self.solver) - known
        if unknown:
            raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
        try:
            return SolverConfig(**self.solver)
        except (InvalidArgumentError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad solver settings: {exc}") from exc

    def interaction(self) -> InteractionParams:
        if self.params is None:
            raise ConfigError("no params given (need alpha1 and alpha2)")
        try:
            return InteractionParams(float(self.params["alpha1"]), float(self.params["alpha2"]))
        except KeyError as exc:
            raise ConfigError(f"params missing {exc}") from exc
        except (InvalidArgumentError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def sweep_points(self):
        if self.sweep is None:
            raise ConfigError("no sweep ranges given")
        axes = []
        for key in ("alpha1", "alpha2"):
            rng = self.sweep.get(key)
            if rng is None or len(rng) != 3:
                raise ConfigError(f"sweep.{key} must be [lo, hi, steps]")
            lo, hi, steps = rng
            if int(steps) != steps or steps < 1:
                raise ConfigError(f"sweep.{key} has an empty range")
            axes.append(np.linspace(float(lo), float(hi), int(steps)))
        points = [(float(a1), float(a2)) for a1 in axes[0] for a2 in axes[1]]
        for a1, a2 in points:
            try:
                InteractionParams(a1, a2)
            except InvalidArgumentError as exc:
                raise ConfigError(str(exc)) from exc
        return points


def load_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(raw) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        grid = raw.get("grid", {})
        cfg.L = grid.get("L", cfg.L)
        cfg.N = grid.get("N", cfg.N)
        cfg.weight = raw.get("weight", cfg.weight)
        cfg.params = raw.get("params")
        cfg.sweep = raw.get("sweep")
        cfg.solver = dict(raw.get("solver", {}))
        cfg.output = raw.get("output")
        cfg.formats = list(raw.get("formats", cfg.formats))

    for name in ("L", "N", "weight", "output", "jobs"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    a1, a2 = getattr(args, "alpha1", None), getattr(args, "alpha2", None)
    if a1 is not None or a2 is not None:
        cfg.params = dict(cfg.params or {})
        if a1 is not None:
            cfg.params["alpha1"] = a1
        if a2 is not None:
            cfg.params["alpha2"] = a2
    for key in ("alpha1", "alpha2"):
        rng = getattr(args, f"{key}_range", None)
        if rng is not None:
            cfg.sweep = dict(cfg.sweep or {})
            cfg.sweep[key] = rng
    if getattr(args, "seed", None) is not None:
        cfg.solver["rng_seed"] = args.seed
    bad = set(cfg.formats) - set(FORMATS)
    if bad:
        raise ConfigError(f"unknown output formats: {sorted(bad)}")
    return cfg


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _fmt(x) -> str:
    # repr gives the shortest string that round-trips exactly
    return repr(float(x))


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _progress_printer(stream):
    def emit(rec):
        stream.write(json.dumps({
            "iteration": rec.iteration,
            "phase": rec.phase,
            "level_estimate": _num(rec.energy),
            "residual": _num(rec.residual),
            "ln_z1": _num(rec.ln_z1),
            "ln_z2": _num(rec.ln_z2),
        }) + "\n")
        stream.flush()
    return emit


def concentration_radii(grid: TorusGrid):
    return [grid.L / 16, grid.L / 8, grid.L / 4]


def result_document(result, gate, grid: TorusGrid, weight: str) -> dict:
    doc = {
        "status": result.status,
        "alpha1": result.params.alpha1,
        "alpha2": result.params.alpha2,
        "grid": {"L": grid.L, "N": grid.N},
        "weight": weight,
        "c": None,
        "path_level": None,
        "residual": None,
        "iterations": result.iterations,
        "sweeps": result.sweeps,
        "polish_steps": result.polish_steps,
        "suspected_blowup": result.suspected_blowup,
        "message": result.message,
        "gate": gate.to_dict(),
        "exp_mass": None,
        "concentration": [],
    }
    if result.solution is not None:
        traj = result.ps_trajectory
        doc["c"] = _num(result.level)
        doc["path_level"] = _num(result.path_level)
        doc["residual"] = _num(result.residual)
        if traj:
            doc["exp_mass"] = {
                "max_plus": _num(math.exp(max(r.ln_z1 for r in traj))),
                "max_minus": _num(math.exp(max(r.ln_z2 for r in traj))),
            }
        doc["concentration"] = [concentration(result.solution, r).to_dict() for r in concentration_radii(grid)]
    return doc


def write_trajectory(path: Path, records) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for r in records:
        w.writerow([r.iteration, _fmt(r.energy), _fmt(r.residual), _fmt(r.ln_z1), _fmt(r.ln_z2)])
    path.write_text(buf.getvalue())


def cmd_solve(args) -> int:
    cfg = load_config(args)
    if cfg.sweep is not None:
        raise ConfigError("solve takes single params, not sweep ranges")
    grid = cfg.grid()
    rho = cfg.weight_field(grid)
    params = cfg.interaction()
    scfg = cfg.solver_config()
    gate = lambda_rho_gate(params, grid, seed=scfg.rng_seed)
    progress = _progress_printer(sys.stderr) if getattr(args, "progress", False) else None
    out = _out_dir(cfg)
    try:
        result = solve(rho, params, scfg, progress=progress)
    except NoNegativeEndpointError as exc:
        result = MountainPassResult(status=NO_NEGATIVE_ENDPOINT, params=params, message=str(exc))
    doc = result_document(result, gate, grid, cfg.weight)
    if "json" in cfg.formats:
        (out / "result.json").write_text(dumps(doc))
    if result.solution is not None:
        if "field" in cfg.formats:
            write_field(out / "solution.field", result.solution)
        if "csv" in cfg.formats:
            write_trajectory(out / "trajectory.csv", result.ps_trajectory)
    print(f"status={result.status} c={doc['c']} residual={doc['residual']} "
          f"in_lambda_rho={gate.in_lambda_rho} coercive_regime={gate.coercive_regime}")
    return {CONVERGED: EXIT_OK, NO_NEGATIVE_ENDPOINT: EXIT_NO_ENDPOINT, BUDGET_EXHAUSTED: EXIT_BUDGET}[result.status]


def _sweep_point(job):
    L, N, weight, rho_values, a1, a2, solver, mu1 = job
    grid = TorusGrid(L, N)
    rho = WeightField(ScalarField(grid, rho_values))
    params = InteractionParams(a1, a2)
    gate = lambda_rho_gate(params, grid, mu1=mu1)
    row = {"alpha1": a1, "alpha2": a2, "in_lambda_rho": gate.in_lambda_rho}
    try:
        res = solve(rho, params, SolverConfig(**solver))
    except NoNegativeEndpointError:
        row.update(status=NO_NEGATIVE_ENDPOINT, c=None, residual=None, sup_v=None, max_mass_fraction=None)
        return row
    row.update(
        status=res.status,
        c=res.level,
        residual=res.residual,
        sup_v=float(np.max(res.solution.values)),
        max_mass_fraction=res.concentration.max_mass_fraction,
    )
    return row


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    if cfg.params is not None:
        raise ConfigError("sweep takes sweep ranges, not single params")
    grid = cfg.grid()
    rho = cfg.weight_field(grid)
    scfg = cfg.solver_config()
    points = cfg.sweep_points()
    jobs = cfg.jobs if cfg.jobs is not None else (os.cpu_count() or 1)
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    out = _out_dir(cfg)
    mu1 = first_eigenvalue(grid, seed=scfg.rng_seed)
    base = asdict(scfg)
    work = []
    for idx, (a1, a2) in enumerate(points):
        solver = dict(base, rng_seed=scfg.rng_seed + idx)
        work.append((grid.L, grid.N, cfg.weight, rho.values, a1, a2, solver, mu1))
    if jobs == 1 or len(work) == 1:
        rows = [_sweep_point(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            rows = list(pool.map(_sweep_point, work))  # map keeps submission order

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for row in rows:
        w.writerow([
            _fmt(row["alpha1"]), _fmt(row["alpha2"]), str(row["in_lambda_rho"]).lower(), row["status"],
            *("" if row[k] is None else _fmt(row[k]) for k in ("c", "residual", "sup_v", "max_mass_fraction")),
        ])
    (out / "sweep.csv").write_text(buf.getvalue())
    print(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    try:
        v = read_field(args.field)
    except FieldFormatError as exc:
        raise ConfigError(str(exc)) from exc
    cfg = load_config(args)
    grid = v.grid
    cfg.L, cfg.N = grid.L, grid.N
    rho = cfg.weight_field(grid)
    params = cfg.interaction() if cfg.params is not None else InteractionParams(0.0, 0.0)
    seed = cfg.solver_config().rng_seed
    report = evaluate(v, rho, params)
    z_plus, z_minus = exp_mass(v)
    deficit = moser_trudinger_deficit(v, rho)
    doc = {
        "alpha1": params.alpha1,
        "alpha2": params.alpha2,
        "grid": {"L": grid.L, "N": grid.N},
        "weight": cfg.weight,
        "functional": {
            "value": report.value,
            "kinetic": report.kinetic,
            "z1": _num(report.z1),
            "z2": _num(report.z2),
            "log_term1": report.log_term1,
            "log_term2": report.log_term2,
            "grad_norm": report.grad_norm,
        },
        "residual": residual_norm(v, rho, params),
        "exp_mass": {"plus": _num(z_plus), "minus": _num(z_minus)},
        "deficits": {"classical": deficit.classical, "weighted": deficit.weighted},
        "concentration": [concentration(v, r).to_dict() for r in concentration_radii(grid)],
        "gate": lambda_rho_gate(params, grid, seed=seed).to_dict(),
        "rho": {"min": rho.rho_min, "max": rho.rho_max, "degenerate": rho.degenerate},
    }
    text = dumps(doc)
    sys.stdout.write(text)
    if cfg.output is not None:
        (_out_dir(cfg) / "diagnose.json").write_text(text)
    return EXIT_OK


def cmd_eigen(args) -> int:
    cfg = load_config(args)
    grid = cfg.grid()
    rho = cfg.weight_field(grid)
    seed = cfg.solver_config().rng_seed
    try:
        mu1 = first_eigenvalue(grid, seed=seed)
        mu1_rho = mu1 if rho.is_uniform and rho.rho_min == 1.0 else first_eigenvalue(grid, rho, seed=seed)
    except ConvergenceError as exc:
        print(f"eigensolver failed: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    doc = {
        "grid": {"L": grid.L, "N": grid.N},
        "mu1": mu1,
        "mu1_volume": mu1 * grid.volume,
        "mu1_weighted": mu1_rho,
        "weight": cfg.weight,
    }
    text = dumps(doc)
    sys.stdout.write(text)
    if cfg.output is not None:
        (_out_dir(cfg) / "eigen.json").write_text(text)
    return EXIT_OK


def _add_common(p, params=True):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--L", type=float, help="torus side length (default 2*pi)")
    p.add_argument("--N", type=int, help="grid points per side (default 64)")
    p.add_argument("--weight", help="weight preset (const:c, cosine:a, bump:a:s) or field file")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--out", dest="output", help="output directory")
    if params:
        p.add_argument("--alpha1", type=float)
        p.add_argument("--alpha2", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="meanfield", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="mountain pass solve at one parameter pair")
    _add_common(p)
    p.add_argument("--progress", action="store_true", help="stream per-sweep JSON records to stderr")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="solve over a grid of (alpha1, alpha2)")
    _add_common(p, params=False)
    p.add_argument("--alpha1-range", nargs=3, type=float, metavar=("LO", "HI", "STEPS"))
    p.add_argument("--alpha2-range", nargs=3, type=float, metavar=("LO", "HI", "STEPS"))
    p.add_argument("--jobs", type=int, help="worker processes (default: CPU count)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("diagnose", help="functional, residual and blow-up diagnostics of a stored field")
    p.add_argument("field", help="field file")
    _add_common(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("eigen", help="first nonzero Laplacian eigenvalue of the grid")
    _add_common(p, params=False)
    p.set_defaults(func=cmd_eigen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors exit 4, --help exits 0
        return exc.code
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except MeanFieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
