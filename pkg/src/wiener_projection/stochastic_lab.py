"""Monte Carlo on Wiener space.

Brownian ensembles, Girsanov log-densities, KL estimators, the
state-independence penalty, the associated process X~, and a sample-average
minimizer of the discretized KL objective over deterministic shifts.

Expectations under a drifted measure are simulated through the
representation B = B~ + F with B~ a Brownian path, never by reweighting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solveh_banded

from .errors import Diverged, InvalidArgument
from .functionals import DriftKernel
from .grid_paths import DiscretePath, TimeGrid, sobolev_norm_sq, trapezoid

BLOCK_PATHS = 64       # paths generated per counter block
N_SECTIONS = 20        # batches for standard errors
INCREMENT_LANE = 0
MIXTURE_LANE = 1
BLOWUP_LEVEL = 1e8


@dataclass(frozen=True)
class Estimate:
    value: float
    std_err: float

    def to_dict(self) -> dict:
        return {"value": self.value, "std_err": self.std_err}


def _block_generator(seed: int, lane: int, block: int) -> np.random.Generator:
    # Philox is counter based: the stream of a block depends only on
    # (seed, lane, block), never on the order blocks are produced in.
    return np.random.Generator(
        np.random.Philox(key=int(seed) & (2**64 - 1), counter=[0, 0, lane, block]))


def _per_path_normals(seed: int, lane: int, M: int, width: int) -> np.ndarray:
    out = np.empty((M, width))
    for b in range(math.ceil(M / BLOCK_PATHS)):
        lo = b * BLOCK_PATHS
        hi = min(M, lo + BLOCK_PATHS)
        block = _block_generator(seed, lane, b).standard_normal((BLOCK_PATHS, width))
        out[lo:hi] = block[:hi - lo]
    return out


def _per_path_uniforms(seed: int, lane: int, M: int) -> np.ndarray:
    out = np.empty(M)
    for b in range(math.ceil(M / BLOCK_PATHS)):
        lo = b * BLOCK_PATHS
        hi = min(M, lo + BLOCK_PATHS)
        out[lo:hi] = _block_generator(seed, lane, b).random(BLOCK_PATHS)[:hi - lo]
    return out


@dataclass(frozen=True, eq=False)
class BrownianEnsemble:
    grid: TimeGrid
    M: int
    seed: int
    increments: np.ndarray = field(repr=False)
    paths: np.ndarray = field(repr=False)

    def coarsen(self, factor: int) -> "BrownianEnsemble":
        """The same Brownian paths observed on every ``factor``-th node."""
        grid = self.grid.coarsen(factor)
        paths = np.ascontiguousarray(self.paths[:, ::factor])
        paths.setflags(write=False)
        inc = np.diff(paths, axis=1)
        inc.setflags(write=False)
        return BrownianEnsemble(grid, self.M, self.seed, inc, paths)

    def sections(self) -> list[slice]:
        k = min(N_SECTIONS, self.M)
        edges = np.linspace(0, self.M, k + 1).round().astype(int)
        return [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]


def sample_ensemble(grid: TimeGrid, M: int, seed: int) -> BrownianEnsemble:
    if int(M) != M or M < 1:
        raise InvalidArgument(f"need at least one path, got M={M}")
    M = int(M)
    inc = _per_path_normals(seed, INCREMENT_LANE, M, grid.n) * math.sqrt(grid.dt)
    paths = np.zeros((M, grid.n + 1))
    np.cumsum(inc, axis=1, out=paths[:, 1:])
    inc.setflags(write=False)
    paths.setflags(write=False)
    return BrownianEnsemble(grid, M, int(seed), inc, paths)


def _sectioned(per_path: np.ndarray, ens: BrownianEnsemble, stat=np.mean) -> float:
    vals = np.array([stat(per_path[s]) for s in ens.sections()])
    if len(vals) < 2:
        return math.nan
    return float(np.std(vals, ddof=1) / math.sqrt(len(vals)))


def _check_grid(a: TimeGrid, b: TimeGrid):
    if a != b:
        raise InvalidArgument(f"grid mismatch: {a} vs {b}")


# --- drift specifications -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DeterministicPath:
    F: DiscretePath

    @property
    def grid(self) -> TimeGrid:
        return self.F.grid


@dataclass(frozen=True, eq=False)
class StateKernel:
    kernel: DriftKernel


@dataclass(frozen=True, eq=False)
class BernoulliMixture:
    """Drift equal to components[i] with probability probs[i], drawn per path
    independently of the Brownian increments."""

    components: tuple[DeterministicPath, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.components) < 2 or len(self.components) != len(self.probs):
            raise InvalidArgument("mixture needs >= 2 components with one prob each")
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise InvalidArgument(f"mixture probabilities must form a simplex, got {self.probs}")
        grids = {c.grid for c in self.components}
        if len(grids) != 1:
            raise InvalidArgument("mixture components live on different grids")

    @property
    def grid(self) -> TimeGrid:
        return self.components[0].grid

    def draws(self, ensemble: BrownianEnsemble) -> np.ndarray:
        """Component index for each ensemble path (separate random lane)."""
        u = _per_path_uniforms(ensemble.seed, MIXTURE_LANE, ensemble.M)
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        return np.searchsorted(cdf, u, side="right")


def mixture_drift(components, probs) -> BernoulliMixture:
    comps = tuple(c if isinstance(c, DeterministicPath) else DeterministicPath(c)
                  for c in components)
    return BernoulliMixture(comps, tuple(float(p) for p in probs))


def _cell_slopes(drift, ens: BrownianEnsemble) -> np.ndarray:
    """Drift slope on each cell for every path, shape (M, n); deterministic parts only."""
    if isinstance(drift, DeterministicPath):
        _check_grid(drift.grid, ens.grid)
        return np.broadcast_to(np.diff(drift.F.values) / ens.grid.dt, (ens.M, ens.grid.n))
    if isinstance(drift, BernoulliMixture):
        _check_grid(drift.grid, ens.grid)
        table = np.array([np.diff(c.F.values) for c in drift.components]) / ens.grid.dt
        return table[drift.draws(ens)]
    raise InvalidArgument(f"{type(drift).__name__} has no path-independent slopes")


def girsanov_logdensity(drift, ensemble: BrownianEnsemble, j: int | None = None):
    """log dmu/dmu0 on ensemble paths, by left-point Ito sums.

    Returns one value per path, or the value on path ``j`` if given.
    """
    grid = ensemble.grid
    if isinstance(drift, StateKernel):
        f = drift.kernel.value(grid.nodes[:-1], ensemble.paths[:, :-1])
    else:
        f = _cell_slopes(drift, ensemble)
    out = np.sum(f * ensemble.increments, axis=1) - 0.5 * np.sum(f**2, axis=1) * grid.dt
    return float(out[j]) if j is not None else out


# --- KL ------------------------------------------------------------------------

def kl_shift(h1: DiscretePath, h2: DiscretePath) -> float:
    """KL divergence between the Wiener measures shifted by h1 and by h2."""
    return 0.5 * sobolev_norm_sq(h1 - h2)


def _kl_per_path(z: np.ndarray, kernel: DriftKernel, ens: BrownianEnsemble) -> np.ndarray:
    grid = ens.grid
    zdot = np.diff(z) / grid.dt
    if kernel.deterministic:
        r = zdot - kernel.value(grid.nodes[:-1], z[:-1])
        return np.full(ens.M, 0.5 * np.sum(r**2) * grid.dt)
    r = zdot - kernel.value(grid.nodes[:-1], ens.paths[:, :-1] + z[:-1])
    return 0.5 * np.sum(r**2, axis=1) * grid.dt


def kl_estimate(z: DiscretePath, kernel: DriftKernel, ensemble: BrownianEnsemble) -> Estimate:
    """KL(mu_z || mu*) where mu* has Girsanov kernel ``kernel``; MC over paths."""
    _check_grid(z.grid, ensemble.grid)
    per_path = _kl_per_path(z.values, kernel, ensemble)
    if not np.all(np.isfinite(per_path)):
        raise Diverged("non-finite KL integrand")
    se = 0.0 if kernel.deterministic else _sectioned(per_path, ensemble)
    return Estimate(float(np.mean(per_path)), se)


# --- state-independence penalty -----------------------------------------------

def _realized_node_slopes(drift, ens: BrownianEnsemble):
    """Realized drift slope at nodes 0..n under mu, plus the mask of usable paths."""
    grid = ens.grid
    if isinstance(drift, StateKernel):
        X = np.zeros(ens.M)
        slopes = np.empty((ens.M, grid.n + 1))
        alive = np.ones(ens.M, dtype=bool)
        with np.errstate(over="ignore", invalid="ignore"):
            for i, t in enumerate(grid.nodes):
                slopes[:, i] = drift.kernel.value(t, X)
                if i < grid.n:
                    X = X + slopes[:, i] * grid.dt + ens.increments[:, i]
                    alive &= np.isfinite(X) & (np.abs(X) < BLOWUP_LEVEL)
                    X = np.where(alive, X, 0.0)
        return slopes, alive
    cells = _cell_slopes(drift, ens)
    return np.concatenate([cells, cells[:, -1:]], axis=1), np.ones(ens.M, dtype=bool)


def penalty_D(drift, ensemble: BrownianEnsemble) -> Estimate:
    """Half the time-integrated variance of the realized drift slope under mu.

    Zero exactly for a deterministic drift.
    """
    if isinstance(drift, DeterministicPath):
        _check_grid(drift.grid, ensemble.grid)
        return Estimate(0.0, 0.0)
    slopes, alive = _realized_node_slopes(drift, ensemble)
    grid = ensemble.grid

    def pen(rows):
        return 0.5 * float(trapezoid(np.var(rows, axis=0, ddof=1), grid))

    usable = slopes[alive]
    if len(usable) < 2:
        raise Diverged("fewer than two non-exploding paths")
    value = pen(usable)
    blocks = [slopes[s][alive[s]] for s in ensemble.sections()]
    vals = np.array([pen(b) for b in blocks if len(b) >= 2])
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan
    return Estimate(value, se)


# --- associated process ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class XtildeResult:
    grid: TimeGrid
    paths: np.ndarray = field(repr=False)      # NaN after blow-up
    exploded: np.ndarray = field(repr=False)
    blowup_times: np.ndarray = field(repr=False)  # NaN where no blow-up

    @property
    def blowup_fraction(self) -> float:
        return float(np.mean(self.exploded))

    def summary(self) -> dict:
        bt = self.blowup_times[self.exploded]
        return {"paths": int(len(self.exploded)),
                "exploded": int(self.exploded.sum()),
                "blowup_fraction": self.blowup_fraction,
                "earliest_blowup": float(bt.min()) if len(bt) else None,
                "threshold": BLOWUP_LEVEL}


def simulate_xtilde(kernel: DriftKernel, ensemble: BrownianEnsemble) -> XtildeResult:
    """Euler scheme for dX = m(t, X) dt + dB along each ensemble path.

    Paths whose state leaves |x| < 1e8 (or turns non-finite) are frozen at NaN
    and reported, never raised.
    """
    grid = ensemble.grid
    X = np.full((ensemble.M, grid.n + 1), np.nan)
    X[:, 0] = 0.0
    alive = np.ones(ensemble.M, dtype=bool)
    when = np.full(ensemble.M, np.nan)
    x = np.zeros(ensemble.M)
    with np.errstate(over="ignore", invalid="ignore"):
        for i, t in enumerate(grid.nodes[:-1]):
            drift = kernel.mean(t, x)
            x = x + drift * grid.dt + ensemble.increments[:, i]
            bad = alive & ~(np.isfinite(x) & (np.abs(x) < BLOWUP_LEVEL))
            when[bad] = grid.nodes[i + 1]
            alive &= ~bad
            x = np.where(alive, x, 0.0)
            X[alive, i + 1] = x[alive]
    return XtildeResult(grid, X, ~alive, when)


# --- sample-average minimizer -------------------------------------------------

@dataclass(frozen=True, eq=False)
class MinimizeReport:
    path: DiscretePath
    objective_trace: np.ndarray = field(repr=False)
    mc_std_err: float
    iterations: int
    converged: bool
    grad_norm: float

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])

    def to_dict(self) -> dict:
        return {"objective": self.objective, "mc_std_err": self.mc_std_err,
                "iterations": self.iterations, "converged": self.converged,
                "grad_norm": self.grad_norm,
                "objective_trace": [float(v) for v in self.objective_trace]}


class FrozenObjective:
    """Sample-average KL objective over node values z_1..z_n (z_0 = 0).

    J(z) = mean_j 1/2 sum_i (zdot_i - f(t_i, B_ji + z_i))^2 dt with the
    ensemble held fixed, so J is a deterministic function of z.
    """

    def __init__(self, kernel: DriftKernel, ensemble: BrownianEnsemble):
        self.kernel = kernel
        self.ens = ensemble
        self.grid = ensemble.grid
        self.t = self.grid.nodes[:-1]
        self._B = ensemble.paths[:, :-1]

    def _full(self, z):
        return np.concatenate([[0.0], np.asarray(z, dtype=float)])

    def residuals(self, z):
        zf = self._full(z)
        zdot = np.diff(zf) / self.grid.dt
        if self.kernel.deterministic:
            x = zf[:-1][None, :]
        else:
            x = self._B + zf[:-1]
        return zdot - self.kernel.value(self.t, x), x

    def value(self, z) -> float:
        r, _ = self.residuals(z)
        return float(0.5 * np.mean(np.sum(r**2, axis=-1)) * self.grid.dt)

    def per_path(self, z) -> np.ndarray:
        r, _ = self.residuals(z)
        return 0.5 * np.sum(r**2, axis=-1) * self.grid.dt

    def gradient(self, z) -> np.ndarray:
        """Exact gradient with respect to z_1..z_n of the frozen-sample objective."""
        r, x = self.residuals(z)
        fx = self.kernel.dx(self.t, x)
        rbar = np.mean(r, axis=0) if r.ndim == 2 else r[0]
        rfx = np.mean(r * fx, axis=0) if r.ndim == 2 else (r * fx)[0]
        n = self.grid.n
        g = np.zeros(n + 1)
        g[1:] += rbar            # zdot_{k-1} depends on +z_k / dt
        g[:-1] -= rbar           # zdot_k depends on -z_k / dt
        g[:-1] -= rfx * self.grid.dt
        return g[1:]


def _sobolev_banded(grid: TimeGrid) -> np.ndarray:
    """Upper banded form of the Cameron-Martin Gram matrix on z_1..z_n."""
    n, dt = grid.n, grid.dt
    ab = np.zeros((2, n))
    ab[0, 1:] = -1.0 / dt
    ab[1, :] = 2.0 / dt
    ab[1, -1] = 1.0 / dt
    return ab


def minimize_action_mc(kernel: DriftKernel, grid: TimeGrid, ensemble: BrownianEnsemble,
                       init: DiscretePath | None = None, steps: int = 500,
                       learn_rate: float = 1.0, tol: float = 1e-6) -> MinimizeReport:
    """Minimize the frozen-sample KL objective over deterministic shifts.

    Gradient descent in the Cameron-Martin metric: the Euclidean gradient is
    mapped through the inverse Sobolev Gram matrix, which removes the 1/dt^2
    conditioning of the kinetic term. Step halving enforces an Armijo
    decrease. Stops when the dual-norm of the gradient is at most
    ``tol * (1 + |J|)`` or after ``steps`` iterations.
    """
    _check_grid(grid, ensemble.grid)
    init = init if init is not None else DiscretePath.zeros(grid)
    _check_grid(init.grid, grid)
    obj = FrozenObjective(kernel, ensemble)
    ab = _sobolev_banded(grid)
    z = init.values[1:].copy()
    J = obj.value(z)
    if not math.isfinite(J):
        raise Diverged("objective is not finite at the initial path")
    trace = [J]
    converged = False
    eta = learn_rate
    gnorm = math.inf
    it = 0
    for it in range(1, steps + 1):
        g = obj.gradient(z)
        d = solveh_banded(ab, g)
        slope = float(g @ d)
        gnorm = math.sqrt(max(slope, 0.0))
        if gnorm <= tol * (1 + abs(J)):
            converged = True
            it -= 1
            break
        eta = min(learn_rate, 2 * eta)
        while True:
            z_new = z - eta * d
            with np.errstate(over="ignore", invalid="ignore"):
                J_new = obj.value(z_new)
            if math.isfinite(J_new) and J_new <= J - 1e-4 * eta * slope:
                break
            eta *= 0.5
            if eta < 1e-14 * learn_rate:
                break
        if not (math.isfinite(J_new) and J_new <= J):
            # line search exhausted: stationary to working precision
            converged = gnorm <= 1e3 * tol * (1 + abs(J))
            break
        z, J = z_new, J_new
        trace.append(J)
    path = DiscretePath(grid, np.concatenate([[0.0], z]))
    se = 0.0 if kernel.deterministic else _sectioned(obj.per_path(z), ensemble)
    return MinimizeReport(path, np.array(trace), se, it, converged, gnorm)
