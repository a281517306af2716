"""Gaussian expectations: exact moments for polynomials, Gauss-Hermite otherwise.

Every expectation over Brownian paths at a fixed time reduces to a
one-dimensional expectation against Normal(mean, var), which lands here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import EvaluationError, InvalidArgument

MAX_DEGREE = 16
DEFAULT_ORDER = 20


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial, ``coeffs[k]`` multiplies ``x**k``; trailing zeros trimmed."""

    coeffs: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        c = [float(v) for v in np.atleast_1d(np.asarray(self.coeffs, dtype=float))]
        if not all(math.isfinite(v) for v in c):
            raise InvalidArgument(f"non-finite polynomial coefficients {c}")
        while len(c) > 1 and c[-1] == 0.0:
            c.pop()
        if not c:
            c = [0.0]
        if len(c) - 1 > MAX_DEGREE:
            raise InvalidArgument(f"degree {len(c) - 1} exceeds cap {MAX_DEGREE}")
        object.__setattr__(self, "coeffs", tuple(c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    def __call__(self, x):
        return npoly.polyval(x, self.coeffs)

    def deriv(self) -> "Polynomial":
        return Polynomial(tuple(npoly.polyder(self.coeffs)) or (0.0,))

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(tuple(npoly.polyadd(self.coeffs, other.coeffs)))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(tuple(npoly.polysub(self.coeffs, other.coeffs)))

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(tuple(npoly.polymul(self.coeffs, other.coeffs)))
        return Polynomial(tuple(float(other) * c for c in self.coeffs))

    __rmul__ = __mul__

    def __neg__(self) -> "Polynomial":
        return self * -1.0


def gaussian_moment(k: int, mean: float, var: float) -> float:
    """E[X**k] for X ~ Normal(mean, var), by the three-term moment recurrence."""
    if k < 0 or int(k) != k:
        raise InvalidArgument(f"moment order must be a nonnegative integer, got {k}")
    if var < 0:
        raise InvalidArgument(f"variance must be nonnegative, got {var}")
    prev, cur = 1.0, float(mean)
    if k == 0:
        return prev
    for j in range(2, int(k) + 1):
        prev, cur = cur, mean * cur + (j - 1) * var * prev
    return cur


def expect_polynomial(p: Polynomial, mean: float, var: float) -> float:
    if var < 0:
        raise InvalidArgument(f"variance must be nonnegative, got {var}")
    total, prev, cur = p.coeffs[0], 1.0, float(mean)
    for k in range(1, p.degree + 1):
        if k > 1:
            prev, cur = cur, mean * cur + (k - 1) * var * prev
        total += p.coeffs[k] * cur
    return float(total)


@lru_cache(maxsize=None)
def _smoothing_table(degree: int) -> np.ndarray:
    """T[k, i, j] = coefficient of x**i v**j in E[(x + sqrt(v) Z)**k]."""
    tab = np.zeros((degree + 1, degree + 1, degree // 2 + 1))
    for k in range(degree + 1):
        for j in range(0, k // 2 + 1):
            # C(k, 2j) * (2j-1)!! * x**(k-2j) * v**j
            dfact = math.prod(range(2 * j - 1, 0, -2)) if j else 1
            tab[k, k - 2 * j, j] = math.comb(k, 2 * j) * dfact
    return tab


def gaussian_smoothing(coeffs: Sequence[float]) -> np.ndarray:
    """Coefficients ``S[i, j]`` with E[p(x + N(0, v))] = sum S[i, j] x**i v**j.

    ``coeffs`` lists the polynomial in ascending powers of x.
    """
    c = np.asarray(coeffs, dtype=float)
    tab = _smoothing_table(len(c) - 1)
    return np.tensordot(c, tab, axes=(0, 0))


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Physicists' Gauss-Hermite rule: integrates against exp(-u**2)."""

    order: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


@lru_cache(maxsize=64)
def gauss_hermite(order: int = DEFAULT_ORDER) -> QuadratureRule:
    if int(order) != order or not 1 <= order <= 64:
        raise InvalidArgument(f"quadrature order must be in [1, 64], got {order}")
    u, w = np.polynomial.hermite.hermgauss(int(order))
    # symmetrize to remove eigen-solver asymmetry in the last bits
    u = 0.5 * (u - u[::-1])
    w = 0.5 * (w + w[::-1])
    u.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(int(order), u, w)


def expect_function(h: Callable, mean, var, rule: QuadratureRule | None = None):
    """E[h(X)] for X ~ Normal(mean, var) by Gauss-Hermite quadrature.

    ``h`` must accept numpy arrays. ``mean`` and ``var`` may be arrays of a
    common shape; the result then has that shape. Zero variance gives ``h(mean)``.
    """
    rule = rule or gauss_hermite(DEFAULT_ORDER)
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    if np.any(var < 0):
        raise InvalidArgument("variance must be nonnegative")
    x = mean[..., None] + np.sqrt(2.0 * var)[..., None] * rule.nodes
    vals = np.broadcast_to(np.asarray(h(x), dtype=float), x.shape)
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("integrand is not finite at a quadrature node")
    out = vals @ rule.weights / math.sqrt(math.pi)
    if np.any(var == 0):
        at_mean = np.broadcast_to(np.asarray(h(mean[..., None]), dtype=float),
                                  mean.shape + (1,))[..., 0]
        out = np.where(var == 0, at_mean, out)
    return float(out) if out.ndim == 0 else out
