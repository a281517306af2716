"""Calculus-of-variations route: Lagrangian, Euler-Lagrange ODE, shooting.

The Lagrangian is kept without a 1/2 prefactor,

    L(t, q, qdot) = E[(qdot - f(t, B(t) + q))^2] = qdot^2 - 2 qdot m + s,

and the action carries it: A(q) = 1/2 int_0^T L dt.  Differentiating, the
m_q terms cancel and the Euler-Lagrange equation becomes explicit:

    qddot = m_t(t, q) + E[f f_x](t, q).

A free terminal value gives the natural boundary condition
qdot(T) = m(T, q(T)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import IntegrationDiverged, InvalidArgument, ShootingFailed
from .functionals import DriftKernel, _check_time
from .grid_paths import DiscretePath, TimeGrid

DEFAULT_SLOPE_BOUND = 50.0
BLOWUP_LEVEL = 1e100


@dataclass(frozen=True, eq=False)
class LagrangianModel:
    kernel: DriftKernel

    @property
    def horizon(self) -> float:
        return self.kernel.horizon


@dataclass(frozen=True)
class FreeEndpoint:
    pass


@dataclass(frozen=True)
class Fixed:
    a: float


def lagrangian(model: LagrangianModel, t, q, qdot):
    _check_time(model.kernel, t)
    k = model.kernel
    val = qdot**2 - 2 * qdot * k.mean(t, q) + k.sq_mean(t, q)
    return np.maximum(val, 0.0) if np.ndim(val) else max(float(val), 0.0)


def el_rhs(model: LagrangianModel, t, q, qdot=None):
    """qddot implied by the Euler-Lagrange equation (independent of qdot)."""
    _check_time(model.kernel, t)
    return model.kernel.el_rhs(t, q)


@dataclass(frozen=True, eq=False)
class Trajectory:
    path: DiscretePath
    qdot: np.ndarray = field(repr=False)

    @property
    def terminal_slope(self) -> float:
        return float(self.qdot[-1])


def _rk4(model: LagrangianModel, slopes: np.ndarray, grid: TimeGrid):
    """Integrate (q, qdot) for a batch of initial slopes.

    Returns q, qdot of shape (len(slopes), n+1); diverged rows hold NaN from
    the first bad node on, and their blow-up times are returned separately.
    """
    dt = grid.dt
    nodes = grid.nodes
    if hasattr(model.kernel, "el_rhs_coefficients"):
        # polynomial kernel: collapse the time dependence once per grid
        table = model.kernel.el_rhs_coefficients(np.arange(2 * grid.n + 1) * (0.5 * dt))

        def rhs(t, q, _k=None):
            c = table[_k]
            out = c[-1] + 0.0 * q
            for a in c[-2::-1]:
                out = out * q + a
            return out
    else:
        def rhs(t, q, _k=None):
            return model.kernel.el_rhs(t, q)
    m = len(slopes)
    Q = np.full((m, grid.n + 1), np.nan)
    P = np.full((m, grid.n + 1), np.nan)
    q = np.zeros(m)
    p = np.asarray(slopes, dtype=float).copy()
    Q[:, 0], P[:, 0] = q, p
    alive = np.ones(m, dtype=bool)
    when = np.full(m, np.nan)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(grid.n):
            t = nodes[i]
            k1q, k1p = p, rhs(t, q, 2 * i)
            k2q, k2p = p + 0.5 * dt * k1p, rhs(t + 0.5 * dt, q + 0.5 * dt * k1q, 2 * i + 1)
            k3q, k3p = p + 0.5 * dt * k2p, rhs(t + 0.5 * dt, q + 0.5 * dt * k2q, 2 * i + 1)
            k4q, k4p = p + dt * k3p, rhs(nodes[i + 1], q + dt * k3q, 2 * i + 2)
            q = q + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
            p = p + dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
            Q[:, i + 1], P[:, i + 1] = q, p
            if not alive.all():
                Q[~alive, i + 1] = np.nan
                P[~alive, i + 1] = np.nan
            if not (np.abs(q).max() < BLOWUP_LEVEL and np.abs(p).max() < BLOWUP_LEVEL):
                ok = (np.abs(q) < BLOWUP_LEVEL) & (np.abs(p) < BLOWUP_LEVEL)
                newly = alive & ~ok
                when[newly] = nodes[i + 1]
                alive &= ok
                Q[~alive, i + 1] = np.nan
                P[~alive, i + 1] = np.nan
                if not alive.any():
                    break
                q = np.where(alive, q, 0.0)
                p = np.where(alive, p, 0.0)
    return Q, P, when


def integrate_el(model: LagrangianModel, slope0: float, grid: TimeGrid) -> Trajectory:
    """Classical RK4 on the Euler-Lagrange system from q(0)=0, qdot(0)=slope0."""
    _check_model_grid(model, grid)
    Q, P, when = _rk4(model, np.array([slope0]), grid)
    if not math.isnan(when[0]):
        raise IntegrationDiverged(
            f"Euler-Lagrange integration blew up at t={when[0]:.6g}", float(when[0]))
    return Trajectory(DiscretePath(grid, Q[0]), P[0])


def _check_model_grid(model, grid):
    if abs(model.horizon - grid.horizon) > 1e-12 * max(1.0, grid.horizon):
        raise InvalidArgument(f"model horizon {model.horizon} != grid horizon {grid.horizon}")


def action(model: LagrangianModel, path: DiscretePath) -> float:
    """1/2 int L dt by the midpoint rule: slopes on cells, q averaged to midpoints."""
    _check_model_grid(model, path.grid)
    grid = path.grid
    q = path.values
    slopes = np.diff(q) / grid.dt
    qm = 0.5 * (q[:-1] + q[1:])
    L = lagrangian(model, grid.midpoints, qm, slopes)
    return float(0.5 * np.sum(L) * grid.dt)


@dataclass(frozen=True, eq=False)
class ELSolution:
    path: DiscretePath
    qdot: np.ndarray = field(repr=False)
    slope0: float
    action: float
    el_residual_max: float
    natural_bc_residual: float
    bc: FreeEndpoint | Fixed
    iterations: int = 0

    @property
    def terminal_value(self) -> float:
        return float(self.path.values[-1])

    def to_dict(self) -> dict:
        return {"slope0": self.slope0, "action": self.action,
                "el_residual_max": self.el_residual_max,
                "natural_bc_residual": self.natural_bc_residual,
                "terminal_value": self.terminal_value,
                "bc": "free" if isinstance(self.bc, FreeEndpoint) else {"fixed": self.bc.a},
                "iterations": self.iterations}


def el_residual(model: LagrangianModel, traj: Trajectory) -> float:
    """Max over interior nodes of |centred second difference - EL right-hand side|."""
    grid = traj.path.grid
    q = traj.path.values
    qdd = (q[2:] - 2 * q[1:-1] + q[:-2]) / grid.dt**2
    rhs = el_rhs(model, grid.nodes[1:-1], q[1:-1], traj.qdot[1:-1])
    return float(np.max(np.abs(qdd - rhs)))


def _boundary_residual(model, bc, Q, P):
    T = model.horizon
    qT, pT = Q[:, -1], P[:, -1]
    if isinstance(bc, Fixed):
        return qT - bc.a
    return pT - model.kernel.mean(T, np.nan_to_num(qT)) + 0 * qT


def shoot(model: LagrangianModel, grid: TimeGrid, bc=FreeEndpoint(),
          slope_bound: float = DEFAULT_SLOPE_BOUND, rtol: float = 1e-9,
          scan_points: int = 41) -> ELSolution:
    """Solve the two-point problem by root-finding on the initial slope.

    The bracket grows geometrically from [-1, 1] to [-slope_bound, slope_bound];
    on each bracket a vectorized scan looks for a sign change of the boundary
    residual, preferring the one nearest slope 0. Brent's method (bisection
    plus secant/inverse-quadratic steps) then refines it.
    """
    _check_model_grid(model, grid)
    bound, width = 1.0, None
    bracket = None
    scanned = []
    while True:
        width = min(bound, slope_bound)
        s = np.linspace(-width, width, scan_points)
        Q, P, _ = _rk4(model, s, grid)
        r = _boundary_residual(model, bc, Q, P)
        scanned.append((width, int(np.isfinite(r).sum())))
        exact = np.flatnonzero(r == 0)
        if exact.size:
            c = s[exact[np.argmin(np.abs(s[exact]))]]
            bracket = (c, c)
            break
        ok = np.isfinite(r[:-1]) & np.isfinite(r[1:]) & (np.sign(r[:-1]) != np.sign(r[1:]))
        idx = np.flatnonzero(ok)
        if idx.size:
            i = idx[np.argmin(np.abs(s[idx] + s[idx + 1]))]
            bracket = (s[i], s[i + 1])
            break
        if width >= slope_bound:
            raise ShootingFailed(
                f"no sign change of the boundary residual for slopes in "
                f"[-{slope_bound}, {slope_bound}]",
                {"scans": scanned,
                 "residual_range": [float(np.nanmin(r)) if np.isfinite(r).any() else None,
                                    float(np.nanmax(r)) if np.isfinite(r).any() else None]})
        bound *= 2.0

    calls = [0]

    def resid(slope):
        calls[0] += 1
        Q, P, when = _rk4(model, np.array([slope]), grid)
        if not math.isnan(when[0]):
            raise IntegrationDiverged(f"blow-up at t={when[0]:.6g} for slope {slope}",
                                      float(when[0]))
        return float(_boundary_residual(model, bc, Q, P)[0])

    lo, hi = bracket
    slope0 = lo if lo == hi else brentq(resid, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                                        maxiter=200)
    traj = integrate_el(model, slope0, grid)
    qT, pT = traj.path.values[-1], traj.terminal_slope
    nbc = float(pT - model.kernel.mean(model.horizon, qT))
    r_final = abs(qT - bc.a) if isinstance(bc, Fixed) else abs(nbc)
    scale = abs(bc.a) if isinstance(bc, Fixed) else abs(pT)
    if r_final > rtol * (1 + scale):
        raise ShootingFailed(f"boundary residual {r_final:.3g} above tolerance",
                             {"bracket": [lo, hi], "slope0": slope0})
    return ELSolution(traj.path, traj.qdot, float(slope0), action(model, traj.path),
                      el_residual(model, traj), nbc, bc, calls[0])


def scan_terminal(model: LagrangianModel, grid: TimeGrid, a_range=(-3.0, 3.0),
                  coarse_points: int = 25, coarse_n: int = 200, xatol: float = 1e-7,
                  slope_bound: float = DEFAULT_SLOPE_BOUND) -> dict:
    """Free endpoint by brute force: minimize the fixed-endpoint action over a.

    A coarse scan on a cheaper grid locates the basin, Brent's bounded
    minimizer refines a on the full grid. Terminal values whose fixed-endpoint
    problem cannot be solved are skipped.
    """
    coarse = TimeGrid(grid.horizon, min(coarse_n, grid.n))

    def fixed_action(a, g):
        try:
            return shoot(model, g, Fixed(float(a)), slope_bound=slope_bound).action
        except (ShootingFailed, IntegrationDiverged):
            return math.inf

    a_vals = np.linspace(*a_range, coarse_points)
    acts = np.array([fixed_action(a, coarse) for a in a_vals])
    if not np.isfinite(acts).any():
        raise ShootingFailed("no terminal value in the scan range could be solved",
                             {"a_range": list(a_range)})
    i = int(np.argmin(acts))
    lo = a_vals[max(i - 1, 0)]
    hi = a_vals[min(i + 1, len(a_vals) - 1)]
    res = minimize_scalar(lambda a: fixed_action(a, grid), bounds=(lo, hi),
                          method="bounded", options={"xatol": xatol})
    return {"a": float(res.x), "action": float(res.fun),
            "coarse_a": a_vals.tolist(), "coarse_action": acts.tolist()}
