"""Uniform time grids, discretized paths and the Cameron-Martin norm.

Slopes of a path live on the midpoints of grid cells (forward differences).
Deterministic time integrals use the trapezoid rule; stochastic integrals
elsewhere in the package use left-point sums.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    n: int

    def __post_init__(self):
        if not np.isfinite(self.horizon) or self.horizon <= 0:
            raise InvalidArgument(f"horizon must be positive, got {self.horizon}")
        if int(self.n) != self.n or self.n < 2:
            raise InvalidArgument(f"need at least 2 steps, got n={self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def dt(self) -> float:
        return self.horizon / self.n

    @property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.n + 1) * self.dt
        t[-1] = self.horizon   # n * dt can miss T by an ulp
        return t

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.dt

    def coarsen(self, factor: int) -> "TimeGrid":
        if factor < 1 or self.n % factor:
            raise InvalidArgument(f"cannot coarsen n={self.n} by {factor}")
        return TimeGrid(self.horizon, self.n // factor)


def uniform_grid(T: float, n: int) -> TimeGrid:
    return TimeGrid(T, n)


@dataclass(frozen=True, eq=False)
class DiscretePath:
    """Path values on the nodes of ``grid``; the first value must be 0."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        q = np.array(self.values, dtype=float)
        if q.shape != (self.grid.n + 1,):
            raise InvalidArgument(
                f"path needs {self.grid.n + 1} values, got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise InvalidArgument("path values must be finite")
        if q[0] != 0.0:
            raise InvalidArgument(f"path must start at 0, got q_0={q[0]}")
        q.setflags(write=False)
        object.__setattr__(self, "values", q)

    @classmethod
    def from_function(cls, grid: TimeGrid, fn) -> "DiscretePath":
        q = np.asarray(fn(grid.nodes), dtype=float) * np.ones(grid.n + 1)
        q[0] = 0.0
        return cls(grid, q)

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "DiscretePath":
        return cls(grid, np.zeros(grid.n + 1))

    def _check_same_grid(self, other: "DiscretePath"):
        if self.grid != other.grid:
            raise InvalidArgument(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other: "DiscretePath") -> "DiscretePath":
        self._check_same_grid(other)
        return DiscretePath(self.grid, self.values + other.values)

    def __sub__(self, other: "DiscretePath") -> "DiscretePath":
        self._check_same_grid(other)
        return DiscretePath(self.grid, self.values - other.values)

    def __mul__(self, alpha: float) -> "DiscretePath":
        return DiscretePath(self.grid, alpha * self.values)

    __rmul__ = __mul__

    def to_csv(self) -> str:
        return write_csv({"t": self.grid.nodes, "q": self.values})


@dataclass(frozen=True, eq=False)
class PathDerivative:
    """Forward-difference slopes, one per grid cell (midpoint convention)."""

    grid: TimeGrid
    slopes: np.ndarray = field(repr=False)

    def __post_init__(self):
        f = np.array(self.slopes, dtype=float)
        if f.shape != (self.grid.n,):
            raise InvalidArgument(f"expected {self.grid.n} slopes, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise InvalidArgument("slopes must be finite")
        f.setflags(write=False)
        object.__setattr__(self, "slopes", f)


def finite_difference(path: DiscretePath) -> PathDerivative:
    return PathDerivative(path.grid, np.diff(path.values) / path.grid.dt)


def sobolev_norm_sq(path: DiscretePath) -> float:
    """Squared Cameron-Martin norm: sum of squared slopes times dt (no 1/2)."""
    slopes = finite_difference(path).slopes
    return float(np.sum(slopes**2) * path.grid.dt)


def trapezoid(samples, grid: TimeGrid) -> float:
    y = np.asarray(samples, dtype=float)
    if y.shape[-1] != grid.n + 1:
        raise InvalidArgument(
            f"need {grid.n + 1} samples on the grid, got {y.shape[-1]}")
    return np.trapezoid(y, dx=grid.dt, axis=-1)


def write_csv(columns: dict[str, np.ndarray]) -> str:
    """Render equal-length columns as CSV with a header row and LF endings."""
    names = list(columns)
    cols = []
    for k in names:
        c = np.asarray(columns[k])
        cols.append([str(int(v)) for v in c] if np.issubdtype(c.dtype, np.integer)
                    else [repr(float(v)) for v in c])
    buf = io.StringIO()
    buf.write(",".join(names) + "\n")
    for row in zip(*cols):
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def read_path_csv(text: str) -> DiscretePath:
    """Inverse of :meth:`DiscretePath.to_csv`; expects a ``t,q`` header."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = [h.strip() for h in lines[0].split(",")]
    if header[:2] != ["t", "q"]:
        raise InvalidArgument(f"expected header 't,q', got {lines[0]!r}")
    data = np.array([[float(x) for x in ln.split(",")[:2]] for ln in lines[1:]])
    t, q = data[:, 0], data[:, 1]
    grid = TimeGrid(t[-1], len(t) - 1)
    if not np.allclose(t, grid.nodes, rtol=0, atol=1e-12 * max(1.0, t[-1])):
        raise InvalidArgument("CSV nodes are not a uniform grid")
    return DiscretePath(grid, q)
