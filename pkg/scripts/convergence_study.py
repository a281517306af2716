"""Grid refinement for the f = x^2 Euler-Lagrange solve and the g = x^3 Ito residual.

    python scripts/convergence_study.py --out results/convergence.csv
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

from wiener_projection import (IntegralTerminal, LagrangianModel, Polynomial, SpacePoly,
                               TimeGrid, ito_kernel, ito_residual, sample_ensemble, shoot)
from wiener_projection.cli import atomic_write
from wiener_projection.grid_paths import write_csv


@dataclass(frozen=True)
class StudyConfig:
    horizon: float = 1.0
    finest_n: int = 2000
    levels: int = 5
    paths: int = 5000
    seed: int = 42


def run(cfg: StudyConfig) -> dict:
    model = LagrangianModel(SpacePoly([[0.0], [0.0], [1.0]], cfg.horizon))
    cost = IntegralTerminal(Polynomial((0, 0, 0, 1)), Polynomial((0,)), cfg.horizon)
    kern = ito_kernel(cost.g, cost.G, cfg.horizon)
    fine = sample_ensemble(TimeGrid(cfg.horizon, cfg.finest_n), cfg.paths, cfg.seed)
    rows = {k: [] for k in ("n", "terminal_value", "action", "el_residual_max",
                            "ito_residual_rms", "ito_residual_se")}
    for level in reversed(range(cfg.levels)):
        factor = 2**level
        grid = TimeGrid(cfg.horizon, cfg.finest_n // factor)
        sol = shoot(model, grid)
        res = ito_residual(cost, kern, fine.coarsen(factor))
        rows["n"].append(grid.n)
        rows["terminal_value"].append(sol.terminal_value)
        rows["action"].append(sol.action)
        rows["el_residual_max"].append(sol.el_residual_max)
        rows["ito_residual_rms"].append(res["residual_rms"])
        rows["ito_residual_se"].append(res["std_err"])
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path)
    p.add_argument("--paths", type=int, default=StudyConfig.paths)
    p.add_argument("--seed", type=int, default=StudyConfig.seed)
    a = p.parse_args(argv)
    text = write_csv(run(StudyConfig(paths=a.paths, seed=a.seed)))
    if a.out:
        atomic_write(a.out, text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
