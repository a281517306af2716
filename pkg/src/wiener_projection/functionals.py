"""Drift kernels f(t, x), cost functionals, and hypothesis audits.

Under the Wiener measure B(t) ~ Normal(0, t), so for a Markovian kernel every
expectation E[h(t, B(t) + x)] is a one-dimensional Gaussian expectation with
mean x and variance t.  Three such fields drive the rest of the package:

    m(t, x)   = E[f(t, N)]
    s(t, x)   = E[f(t, N)**2]
    ffx(t, x) = E[f(t, N) * f_x(t, N)]          N ~ Normal(x, t)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import InvalidArgument, UnsupportedKernel
from .gaussian_calc import (DEFAULT_ORDER, Polynomial, expect_function,
                            gauss_hermite, gaussian_smoothing)
from .grid_paths import DiscretePath, TimeGrid, trapezoid

MAX_SPACE_DEGREE = 8


class DriftKernel:
    """Base class; subclasses evaluate f and its Gaussian-smoothed fields.

    All methods broadcast over array-valued ``t`` and ``x``.
    """

    horizon: float
    deterministic: bool = False

    def value(self, t, x):
        raise NotImplementedError

    def dx(self, t, x):
        raise UnsupportedKernel(f"{type(self).__name__} has no x-derivative")

    def mean(self, t, x):
        raise NotImplementedError

    def sq_mean(self, t, x):
        raise NotImplementedError

    def ffx_mean(self, t, x):
        raise NotImplementedError

    def mean_dt(self, t, x):
        """Total time derivative of m(t, x) at fixed x (variance grows with t).

        Centred difference with step max(1e-5, 1e-5 T); second-order one-sided
        differences within one step of either end of [0, T].
        """
        h = max(1e-5, 1e-5 * self.horizon)
        if np.ndim(t) == 0:
            t = float(t)
            if t < h:
                return (-3 * self.mean(t, x) + 4 * self.mean(t + h, x)
                        - self.mean(t + 2 * h, x)) / (2 * h)
            if t > self.horizon - h:
                return (3 * self.mean(t, x) - 4 * self.mean(t - h, x)
                        + self.mean(t - 2 * h, x)) / (2 * h)
            return (self.mean(t + h, x) - self.mean(t - h, x)) / (2 * h)
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
        out = np.empty(t.shape)
        for idx in np.ndindex(t.shape):
            out[idx] = self.mean_dt(float(t[idx]), float(x[idx]))
        return out

    def el_rhs(self, t, q):
        """m_t + E[f f_x]: the acceleration prescribed by the Euler-Lagrange equation."""
        return self.mean_dt(t, q) + self.ffx_mean(t, q)


def _bivariate_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            if a[i, j]:
                out[i:i + b.shape[0], j:j + b.shape[1]] += a[i, j] * b
    return out


def _smooth_in_time(c: np.ndarray) -> np.ndarray:
    """Map f(t, x) = sum c[i, j] x**i t**j to E[f(t, x + N(0, t))]."""
    out = np.zeros((c.shape[0], c.shape[1] + c.shape[0] // 2))
    for j in range(c.shape[1]):
        s = gaussian_smoothing(c[:, j])  # s[i, l]: x**i t**l
        out[:s.shape[0], j:j + s.shape[1]] += s
    return out


class SpacePoly(DriftKernel):
    """f(t, x) = sum_k a_k(t) x**k with polynomial a_k.

    ``coeffs[k][j]`` is the coefficient of ``x**k t**j``.  The smoothed fields
    are bivariate polynomials too, precomputed once so evaluation is exact
    and vectorized.
    """

    def __init__(self, coeffs, horizon: float):
        c = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if not np.all(np.isfinite(c)):
            raise InvalidArgument("kernel coefficients must be finite")
        while c.shape[0] > 1 and not np.any(c[-1]):
            c = c[:-1]
        while c.shape[1] > 1 and not np.any(c[:, -1]):
            c = c[:, :-1]
        if c.shape[0] - 1 > MAX_SPACE_DEGREE:
            raise InvalidArgument(
                f"x-degree {c.shape[0] - 1} exceeds cap {MAX_SPACE_DEGREE}")
        if not horizon > 0:
            raise InvalidArgument(f"horizon must be positive, got {horizon}")
        c.setflags(write=False)
        self.coeffs = c
        self.horizon = float(horizon)
        self.deterministic = c.shape[0] == 1
        cx = npoly.polyder(c, axis=0) if c.shape[0] > 1 else np.zeros((1, c.shape[1]))
        self._dx = cx
        self._m = _smooth_in_time(c)
        self._s = _smooth_in_time(_bivariate_mul(c, c))
        self._ffx = _smooth_in_time(_bivariate_mul(c, cx))
        self._mt = (npoly.polyder(self._m, axis=1) if self._m.shape[1] > 1
                    else np.zeros((self._m.shape[0], 1)))
        rows = max(self._mt.shape[0], self._ffx.shape[0])
        cols = max(self._mt.shape[1], self._ffx.shape[1])
        acc = np.zeros((rows, cols))
        acc[:self._mt.shape[0], :self._mt.shape[1]] += self._mt
        acc[:self._ffx.shape[0], :self._ffx.shape[1]] += self._ffx
        self._acc = acc

    @classmethod
    def from_polys(cls, polys: list[Polynomial], horizon: float) -> "SpacePoly":
        """``polys[k]`` is the time polynomial multiplying ``x**k``."""
        width = max(len(p.coeffs) for p in polys)
        c = np.zeros((len(polys), width))
        for k, p in enumerate(polys):
            c[k, :len(p.coeffs)] = p.coeffs
        return cls(c, horizon)

    @staticmethod
    def _eval(c, t, x):
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
        out = npoly.polyval2d(x, t, c)
        return float(out) if np.ndim(out) == 0 else out

    def value(self, t, x):
        return self._eval(self.coeffs, t, x)

    def dx(self, t, x):
        return self._eval(self._dx, t, x)

    def mean(self, t, x):
        return self._eval(self._m, t, x)

    def sq_mean(self, t, x):
        return self._eval(self._s, t, x)

    def ffx_mean(self, t, x):
        return self._eval(self._ffx, t, x)

    def mean_dt(self, t, x):
        return self._eval(self._mt, t, x)

    def el_rhs_coefficients(self, times) -> np.ndarray:
        """Rows of x-coefficients of the EL right-hand side, one row per time."""
        powers = np.asarray(times, float)[:, None] ** np.arange(self._acc.shape[1])
        return powers @ self._acc.T

    def el_rhs(self, t, q):
        if np.ndim(t) == 0:
            # Horner in x with time-collapsed coefficients: the hot path of RK4
            cx = self._acc @ (float(t) ** np.arange(self._acc.shape[1]))
            out = np.full(np.shape(q), cx[-1])
            for c in cx[-2::-1]:
                out = out * q + c
            return float(out) if np.ndim(out) == 0 else out
        return self._eval(self._acc, t, q)

    def scaled(self, factor: float) -> "SpacePoly":
        return SpacePoly(factor * self.coeffs, self.horizon)

    def coefficient_polys(self) -> list[Polynomial]:
        return [Polynomial(tuple(row)) for row in self.coeffs]

    def to_config(self) -> dict:
        return {"type": "space_poly", "coeffs": self.coeffs.tolist()}

    def __repr__(self):
        return f"SpacePoly(coeffs={self.coeffs.tolist()}, horizon={self.horizon})"


class DeterministicPoly(SpacePoly):
    """State-independent kernel f(t, x) = p(t)."""

    def __init__(self, p: Polynomial, horizon: float):
        super().__init__([list(p.coeffs)], horizon)
        self.poly = p

    def to_config(self) -> dict:
        return {"type": "deterministic_poly", "coeffs": list(self.poly.coeffs)}

    def __repr__(self):
        return f"DeterministicPoly({self.poly.coeffs}, horizon={self.horizon})"


class PathSlopeKernel(DriftKernel):
    """Deterministic kernel equal to the slope of a discrete path on each cell.

    At a node t_i the slope of cell i is used (left-continuous in the Ito
    sense), so left-point sums on the path's own grid reproduce its slopes.
    """

    deterministic = True

    def __init__(self, path: DiscretePath):
        self.path = path
        self.horizon = path.grid.horizon
        self._slopes = np.diff(path.values) / path.grid.dt

    def _at(self, t):
        g = self.path.grid
        idx = np.clip(np.floor(np.asarray(t, float) / g.dt + 1e-9).astype(int),
                      0, g.n - 1)
        return self._slopes[idx]

    def value(self, t, x):
        out = self._at(t) + np.zeros(np.broadcast_shapes(np.shape(t), np.shape(x)))
        return float(out) if out.ndim == 0 else out

    def dx(self, t, x):
        return 0.0 * self.value(t, x)

    mean = value

    def sq_mean(self, t, x):
        return self.value(t, x) ** 2

    def ffx_mean(self, t, x):
        return 0.0 * self.value(t, x)

    def to_config(self) -> dict:
        return {"type": "path_slope", "t": self.path.grid.nodes.tolist(),
                "q": self.path.values.tolist()}


class Callback(DriftKernel):
    """Black-box kernel; expectations by Gauss-Hermite quadrature.

    ``f(t, x)`` and ``f_x(t, x)`` must broadcast over numpy arrays and be safe
    to call concurrently.
    """

    def __init__(self, f: Callable, horizon: float, f_x: Callable | None = None,
                 order: int = DEFAULT_ORDER, deterministic: bool = False,
                 config: dict | None = None):
        if not horizon > 0:
            raise InvalidArgument(f"horizon must be positive, got {horizon}")
        self.f = f
        self.f_x = f_x
        self.horizon = float(horizon)
        self.rule = gauss_hermite(order)
        self.deterministic = deterministic
        self._config = config

    def _expect(self, h, t, x):
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
        return expect_function(lambda y: h(t[..., None], y), x, t, self.rule)

    def value(self, t, x):
        out = np.asarray(self.f(t, x), dtype=float)
        out = out + np.zeros(np.broadcast_shapes(np.shape(t), np.shape(x)))
        return float(out) if out.ndim == 0 else out

    def dx(self, t, x):
        if self.f_x is None:
            raise UnsupportedKernel("callback kernel was given no f_x")
        out = np.asarray(self.f_x(t, x), dtype=float)
        out = out + np.zeros(np.broadcast_shapes(np.shape(t), np.shape(x)))
        return float(out) if out.ndim == 0 else out

    def mean(self, t, x):
        return self._expect(self.f, t, x)

    def sq_mean(self, t, x):
        return self._expect(lambda tt, y: np.asarray(self.f(tt, y)) ** 2, t, x)

    def ffx_mean(self, t, x):
        if self.f_x is None:
            raise UnsupportedKernel("callback kernel was given no f_x")
        return self._expect(
            lambda tt, y: np.asarray(self.f(tt, y)) * np.asarray(self.f_x(tt, y)), t, x)

    def to_config(self) -> dict:
        if self._config is None:
            raise UnsupportedKernel("callback kernel has no serializable form")
        return dict(self._config)


def expression_kernel(f: str, horizon: float, order: int = DEFAULT_ORDER) -> Callback:
    """Build a kernel from an expression in ``t`` and ``x`` (e.g. ``"sin(t)"``).

    The x-derivative is taken symbolically.
    """
    import sympy

    t, x = sympy.symbols("t x", real=True)
    try:
        expr = sympy.sympify(f, locals={"t": t, "x": x})
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise InvalidArgument(f"cannot parse kernel expression {f!r}: {exc}") from exc
    extra = expr.free_symbols - {t, x}
    if extra:
        raise InvalidArgument(f"unknown symbols {sorted(map(str, extra))} in {f!r}")
    dexpr = sympy.diff(expr, x)
    fn = sympy.lambdify((t, x), expr, "numpy")
    dfn = sympy.lambdify((t, x), dexpr, "numpy")
    return Callback(fn, horizon, f_x=dfn, order=order,
                    deterministic=x not in expr.free_symbols,
                    config={"type": "expr", "f": f})


def _check_time(kernel: DriftKernel, t):
    t = np.asarray(t, dtype=float)
    tol = 1e-12 * kernel.horizon
    if np.any(t < -tol) or np.any(t > kernel.horizon + tol):
        raise InvalidArgument(f"time outside [0, {kernel.horizon}]")


def kernel_mean(kernel: DriftKernel, t, x):
    _check_time(kernel, t)
    return kernel.mean(t, x)


def kernel_sq_mean(kernel: DriftKernel, t, x):
    _check_time(kernel, t)
    return kernel.sq_mean(t, x)


def kernel_ffx_mean(kernel: DriftKernel, t, x):
    _check_time(kernel, t)
    return kernel.ffx_mean(t, x)


# --- cost functionals -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ItoForm:
    """C = C0 - int f(t, B(t)) dB(t)."""

    C0: float
    kernel: DriftKernel

    @property
    def horizon(self) -> float:
        return self.kernel.horizon

    def evaluate(self, paths: np.ndarray, grid: TimeGrid) -> np.ndarray:
        _check_horizon(self.horizon, grid)
        t = grid.nodes[:-1]
        f = self.kernel.value(t, paths[:, :-1])
        return self.C0 - np.sum(f * np.diff(paths, axis=1), axis=1)


@dataclass(frozen=True, eq=False)
class IntegralTerminal:
    """C = int_0^T g(B(t)) dt + G(B(T))."""

    g: Polynomial
    G: Polynomial
    horizon: float

    def evaluate(self, paths: np.ndarray, grid: TimeGrid) -> np.ndarray:
        _check_horizon(self.horizon, grid)
        return trapezoid(self.g(paths), grid) + self.G(paths[:, -1])


def _check_horizon(T: float, grid: TimeGrid):
    if abs(T - grid.horizon) > 1e-12 * max(1.0, T):
        raise InvalidArgument(f"cost horizon {T} does not match grid horizon {grid.horizon}")


# --- audits -----------------------------------------------------------------

@dataclass
class AuditReport:
    """Sampled evidence for the analytic hypotheses. Heuristic, not a proof."""

    coercivity_ok: bool | None = None
    alpha: float | None = None
    beta: float | None = None
    joint_convexity_ok: bool | None = None
    worst_eigenvalue: float | None = None
    lipschitz_g: float | None = None
    lipschitz_G: float | None = None
    bounded_below_ok: bool | None = None
    entropy_estimate: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class AuditBox:
    t_range: tuple[float, float]
    x_range: tuple[float, float] = (-2.0, 2.0)
    qdot_range: tuple[float, float] = (-2.0, 2.0)


CONVEXITY_TOL = -1e-8
HESSIAN_STEP = 1e-2


def _lagrangian(kernel, t, q, qdot):
    return qdot**2 - 2 * qdot * kernel.mean(t, q) + kernel.sq_mean(t, q)


def audit_hypotheses(subject, box: AuditBox, samples: int = 400, seed: int = 0,
                     alpha: float = 0.5) -> AuditReport:
    """Scan ``box`` for evidence of coercivity, joint convexity, Lipschitz bounds.

    ``subject`` is a :class:`DriftKernel` (Lagrangian checks) or an
    :class:`IntegralTerminal` cost (Lipschitz / lower-bound checks).
    """
    if samples < 100:
        raise InvalidArgument("audit needs at least 100 samples")
    rng = np.random.default_rng(seed)
    report = AuditReport(notes=["sampled evidence on a finite box; not a proof"])
    if isinstance(subject, DriftKernel):
        _audit_kernel(subject, box, samples, rng, alpha, report)
    elif isinstance(subject, IntegralTerminal):
        _audit_cost(subject, box, samples, report)
    else:
        raise InvalidArgument(f"cannot audit {type(subject).__name__}")
    return report


def _audit_kernel(kernel, box, samples, rng, alpha, report):
    t = rng.uniform(*box.t_range, samples)
    q = rng.uniform(*box.x_range, samples)
    p = rng.uniform(*box.qdot_range, samples)
    t[:2], q[:2], p[:2] = box.t_range, box.x_range, box.qdot_range
    m, s = kernel.mean(t, q), kernel.sq_mean(t, q)

    # L - alpha*qdot^2 is a convex quadratic in qdot; minimise over the qdot range
    pstar = np.clip(m / (1 - alpha), *box.qdot_range)
    gap = (1 - alpha) * pstar**2 - 2 * pstar * m + s
    report.alpha = alpha
    report.beta = float(max(0.0, -np.min(gap)))
    report.coercivity_ok = bool(np.isfinite(report.beta))

    L = _lagrangian(kernel, t, q, p)
    report.bounded_below_ok = bool(np.min(L) >= -1e-10 * (1 + np.max(np.abs(L))))

    h = HESSIAN_STEP
    Lq = lambda dq, dp: _lagrangian(kernel, t, q + dq, p + dp)
    L0 = Lq(0, 0)
    hqq = (Lq(h, 0) - 2 * L0 + Lq(-h, 0)) / h**2
    hpp = (Lq(0, h) - 2 * L0 + Lq(0, -h)) / h**2
    hqp = (Lq(h, h) - Lq(h, -h) - Lq(-h, h) + Lq(-h, -h)) / (4 * h**2)
    tr, det = hqq + hpp, hqq * hpp - hqp**2
    lam_min = 0.5 * (tr - np.sqrt(np.maximum(tr**2 - 4 * det, 0.0)))
    report.worst_eigenvalue = float(np.min(lam_min))
    report.joint_convexity_ok = bool(report.worst_eigenvalue >= CONVEXITY_TOL)
    if not report.joint_convexity_ok:
        report.notes.append("Hessian of L in (q, qdot) has a negative eigenvalue on the box")


def _lipschitz(p: Polynomial, lo: float, hi: float, samples: int) -> float:
    x = np.linspace(lo, hi, samples)
    y = p(x)
    return float(np.max(np.abs(np.diff(y) / np.diff(x))))


def _bounded_below(p: Polynomial) -> bool:
    return p.degree == 0 or (p.degree % 2 == 0 and p.coeffs[-1] > 0)


def _audit_cost(cost: IntegralTerminal, box, samples, report):
    lo, hi = box.x_range
    report.lipschitz_g = _lipschitz(cost.g, lo, hi, samples)
    report.lipschitz_G = _lipschitz(cost.G, lo, hi, samples)
    report.bounded_below_ok = _bounded_below(cost.g) and _bounded_below(cost.G)
    for name, p in (("g", cost.g), ("G", cost.G)):
        if p.degree > 1:
            report.notes.append(f"{name} has degree {p.degree}: not globally Lipschitz")
    if not report.bounded_below_ok:
        report.notes.append("cost not bounded below; finite-entropy condition may fail")


def entropy_check(cost, ensemble) -> tuple[float, float]:
    """Sampled E[exp(-C)|C|] and the largest single-path share of that sum.

    A share near 1 means one path dominates: a symptom of infinite moments.
    """
    vals = cost.evaluate(ensemble.paths, ensemble.grid)
    terms = np.exp(-vals) * np.abs(vals)
    total = float(np.sum(terms))
    if not math.isfinite(total):
        return math.inf, 1.0
    return total / len(vals), float(np.max(terms) / total) if total > 0 else 0.0
