"""Command-line front end: ``wiener-project <command> --config <file>``.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .clark_ocone import ito_kernel, ito_residual
from .config import (ConfigError, build_cost, build_drift, build_kernel, load_config,
                     poly_path)
from .errors import (Diverged, EvaluationError, IntegrationDiverged, InvalidArgument,
                     ShootingFailed, UnsupportedKernel)
from .functionals import AuditBox, audit_hypotheses
from .grid_paths import TimeGrid, read_path_csv, write_csv
from .stochastic_lab import (kl_estimate, minimize_action_mc, penalty_D, sample_ensemble,
                             simulate_xtilde)
from .validate import format_table, render_report, run_battery
from .variational import FreeEndpoint, Fixed, LagrangianModel, scan_terminal, shoot

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2
MAX_ENSEMBLE_CELLS = 200_000_000   # M * n, about 1.6 GB per float array


# --- output helpers -------------------------------------------------------------

def _clean(obj):
    """Make ``obj`` JSON-serialisable: numpy scalars, arrays, non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def atomic_write(path: Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- shared plumbing -------------------------------------------------------------

def _grid(cfg) -> TimeGrid:
    return TimeGrid(float(cfg["horizon"]), int(cfg["n"]))


def _ensemble(cfg, grid):
    M = int(cfg["ensemble"]["M"])
    if M * grid.n > MAX_ENSEMBLE_CELLS:
        raise ConfigError(f"ensemble/M: M*n = {M * grid.n} exceeds {MAX_ENSEMBLE_CELLS}")
    return sample_ensemble(grid, M, int(cfg["ensemble"]["seed"]))


def _require(cfg, key, command):
    if key not in cfg["problem"]:
        have = ", ".join(cfg["problem"]) or "none"
        raise ConfigError(f"problem/{key}: required by '{command}' (config has: {have})")
    return cfg["problem"][key]


def _target_kernel(cfg, command):
    """Kernel given directly, or the negated Ito kernel of the cost C.

    exp(-C) = exp(-E[C] - int f_C dB), so the drift of the target measure
    is -f_C.
    """
    T = float(cfg["horizon"])
    if "kernel" in cfg["problem"]:
        return build_kernel(cfg["problem"]["kernel"], T), None
    if "cost" in cfg["problem"]:
        cost = build_cost(cfg["problem"]["cost"], T)
        res = ito_kernel(cost.g, cost.G, T)
        return res.kernel.scaled(-1.0), res
    raise ConfigError(f"problem: '{command}' needs a kernel or cost spec")


def _bc(cfg):
    bc = cfg["solver"]["bc"]
    return FreeEndpoint() if bc == "free" else Fixed(float(bc["fixed"]))


# --- commands --------------------------------------------------------------------

def cmd_kernel(cfg, out: Path) -> int:
    spec = _require(cfg, "cost", "kernel")
    T = float(cfg["horizon"])
    cost = build_cost(spec, T)
    res = ito_kernel(cost.g, cost.G, T)
    log = res.derivation_log.splitlines()
    atomic_write(out / "kernel.json", dumps({
        "horizon": T,
        "kernel": res.kernel.to_config(),
        "tau_coeffs": res.tau_coeffs,
        "mean_C": res.mean_C,
        "derivation_log": log,
        "warnings": [ln for ln in log if ln.startswith("note:")],
        "config": cfg}))
    grid = _grid(cfg)
    resid = ito_residual(cost, res, _ensemble(cfg, grid))
    atomic_write(out / "residual.json", dumps({
        **resid, "n": grid.n, "M": cfg["ensemble"]["M"], "seed": cfg["ensemble"]["seed"]}))
    print(next(ln for ln in log if ln.startswith("f(s, x)")))
    print(f"ito residual rms {resid['residual_rms']:.6g} (se {resid['std_err']:.2g})")
    return EXIT_OK


def _audit_box(T, q, qdot):
    return AuditBox((0.0, T), (float(q.min()) - 1.0, float(q.max()) + 1.0),
                    (float(qdot.min()) - 1.0, float(qdot.max()) + 1.0))


def cmd_solve(cfg, out: Path) -> int:
    kernel, derived = _target_kernel(cfg, "solve")
    grid = _grid(cfg)
    model = LagrangianModel(kernel)
    sv = cfg["solver"]
    sol = shoot(model, grid, _bc(cfg), slope_bound=float(sv["slope_bound"]),
                rtol=float(sv["rtol"]))
    audit = audit_hypotheses(kernel, _audit_box(grid.horizon, sol.path.values, sol.qdot))
    kl = kl_estimate(sol.path, kernel, _ensemble(cfg, grid))
    report = {**sol.to_dict(), "audit": audit.to_dict(), "kl_estimate": kl.to_dict(),
              "kernel": kernel.to_config(), "config": cfg}
    if derived is not None:
        report["kernel_source"] = "negated Ito kernel of the cost"
    if sv["scan_a"]:
        scan = scan_terminal(model, grid, tuple(sv["scan_a_range"]))
        report["scan_a"] = {**scan, "terminal_gap": abs(scan["a"] - sol.terminal_value)}
    if cfg["outputs"]["emit_paths"]:
        atomic_write(out / "solution.csv",
                     write_csv({"t": grid.nodes, "q": sol.path.values, "qdot": sol.qdot}))
    atomic_write(out / "report.json", dumps(report))
    print(f"slope0 {sol.slope0:.10g}  q(T) {sol.terminal_value:.10g}  action {sol.action:.10g}")
    print(f"kl {kl.value:.6g} (se {kl.std_err:.2g})")
    return EXIT_OK


def cmd_om(cfg, out: Path) -> int:
    kernel, _ = _target_kernel(cfg, "om")
    grid = _grid(cfg)
    mc = cfg["mc_minimizer"]
    init = poly_path(mc["init"], grid, "mc_minimizer/init")
    rep = minimize_action_mc(kernel, grid, _ensemble(cfg, grid), init=init,
                             steps=int(mc["steps"]), learn_rate=float(mc["learn_rate"]),
                             tol=float(mc["tol"]))
    report = {**rep.to_dict(), "config": cfg}
    sol_file = out / "solution.csv"
    if sol_file.exists():
        try:
            other = read_path_csv(sol_file.read_text(encoding="utf-8"))
        except (InvalidArgument, ValueError, IndexError) as exc:
            report["cross_route"] = {"error": f"unreadable solution.csv: {exc}"}
        else:
            if other.grid == grid:
                report["cross_route"] = {
                    "sup_gap": float(np.max(np.abs(other.values - rep.path.values)))}
            else:
                report["cross_route"] = {"error": "solution.csv is on a different grid"}
    if cfg["outputs"]["emit_paths"]:
        atomic_write(out / "om_solution.csv", rep.path.to_csv())
    atomic_write(out / "om_report.json", dumps(report))
    print(f"objective {rep.objective:.10g} (se {rep.mc_std_err:.2g}), "
          f"{rep.iterations} iterations, converged={rep.converged}")
    if "cross_route" in report and "sup_gap" in report["cross_route"]:
        print(f"sup gap to shooting path {report['cross_route']['sup_gap']:.4g}")
    return EXIT_OK


def cmd_penalty(cfg, out: Path) -> int:
    spec = _require(cfg, "drift", "penalty")
    grid = _grid(cfg)
    est = penalty_D(build_drift(spec, grid), _ensemble(cfg, grid))
    atomic_write(out / "penalty.json", dumps({**est.to_dict(), "drift": spec, "config": cfg}))
    print(f"penalty {est.value:.6g} (se {est.std_err:.2g})")
    return EXIT_OK


def cmd_simulate(cfg, out: Path) -> int:
    kernel, _ = _target_kernel(cfg, "simulate")
    grid = _grid(cfg)
    res = simulate_xtilde(kernel, _ensemble(cfg, grid))
    K = min(int(cfg["outputs"]["emit_xtilde"]), res.paths.shape[0])
    if K:
        cols = {"t": grid.nodes}
        cols.update({f"x{j}": res.paths[j] for j in range(K)})
        atomic_write(out / "xtilde.csv", write_csv(cols))
    atomic_write(out / "blowup.json", dumps({**res.summary(), "config": cfg}))
    s = res.summary()
    print(f"{s['exploded']} of {s['paths']} paths exceeded |x| = {s['threshold']:g}")
    return EXIT_OK


def cmd_validate(args, out: Path | None) -> int:
    only = args.only.split(",") if args.only else None
    scale = {}
    for item in args.tol_scale or []:
        cid, _, val = item.partition("=")
        try:
            scale[cid] = float(val)
        except ValueError:
            raise ConfigError(f"--tol-scale expects ID=FACTOR, got {item!r}")
    try:
        results = run_battery(only=only, tol_scale=scale)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]))
    sys.stdout.write(format_table(results))
    if out is not None:
        atomic_write(out / "validate_report.json", render_report(results))
    failed = [r.id for r in results if not r.passed]
    if failed:
        print(f"failed: {', '.join(failed)}")
    return EXIT_OK if not failed else EXIT_NUMERIC


COMMANDS = {"kernel": cmd_kernel, "solve": cmd_solve, "om": cmd_om,
            "penalty": cmd_penalty, "simulate": cmd_simulate}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wiener-project",
                                description="Projection onto shifted Wiener measures.")
    p.add_argument("command", choices=[*COMMANDS, "validate"])
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--out", type=Path, help="output directory (overrides outputs.directory)")
    p.add_argument("--seed", type=int, help="ensemble seed (overrides ensemble.seed)")
    p.add_argument("--scan-a", action="store_true",
                   help="also minimise the fixed-endpoint action over terminal values")
    p.add_argument("--only", help=argparse.SUPPRESS)
    p.add_argument("--tol-scale", action="append", help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args, args.out)
        if args.config is None:
            raise ConfigError("--config is required")
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}")
        overrides = {}
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            overrides["ensemble.seed"] = args.seed
        if args.out is not None:
            overrides["outputs.directory"] = str(args.out)
        if args.scan_a:
            overrides["solver.scan_a"] = True
        cfg = load_config(text, overrides)
        return COMMANDS[args.command](cfg, Path(cfg["outputs"]["directory"]))
    except (ConfigError, InvalidArgument, UnsupportedKernel) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ShootingFailed as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        print(dumps({"diagnostics": exc.diagnostics}), file=sys.stderr, end="")
        return EXIT_NUMERIC
    except (IntegrationDiverged, Diverged, EvaluationError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
