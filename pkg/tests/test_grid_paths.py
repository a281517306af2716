import numpy as np
import pytest
from hypothesis import given, strategies as st

from wiener_projection import (DiscretePath, InvalidArgument, TimeGrid, finite_difference,
                               sobolev_norm_sq, trapezoid)
from wiener_projection.grid_paths import read_path_csv, write_csv

horizons = st.floats(0.1, 10.0)
steps = st.integers(2, 300)


def test_grid_basics():
    g = TimeGrid(2.0, 4)
    assert g.dt == 0.5
    np.testing.assert_array_equal(g.nodes, [0, 0.5, 1, 1.5, 2])
    np.testing.assert_array_equal(g.midpoints, [0.25, 0.75, 1.25, 1.75])
    assert g.coarsen(2) == TimeGrid(2.0, 2)


@pytest.mark.parametrize("T,n", [(0.0, 10), (-1.0, 10), (float("nan"), 10), (1.0, 1), (1.0, 2.5)])
def test_grid_rejects_bad_arguments(T, n):
    with pytest.raises(InvalidArgument):
        TimeGrid(T, n)


def test_coarsen_requires_divisor():
    with pytest.raises(InvalidArgument):
        TimeGrid(1.0, 10).coarsen(3)


def test_path_invariants():
    g = TimeGrid(1.0, 4)
    with pytest.raises(InvalidArgument):
        DiscretePath(g, [0.1, 0, 0, 0, 0])
    with pytest.raises(InvalidArgument):
        DiscretePath(g, [0, 0, np.inf, 0, 0])
    with pytest.raises(InvalidArgument):
        DiscretePath(g, [0, 0, 0])
    p = DiscretePath(g, [0, 1, 2, 3, 4])
    with pytest.raises(ValueError):
        p.values[1] = 5.0


def test_linear_path_norm():
    g = TimeGrid(1.0, 1000)
    assert sobolev_norm_sq(DiscretePath.from_function(g, lambda t: t)) == pytest.approx(1.0, abs=1e-12)
    assert sobolev_norm_sq(DiscretePath.zeros(g)) == 0.0


def test_finite_difference_of_quadratic():
    g = TimeGrid(1.0, 10)
    d = finite_difference(DiscretePath.from_function(g, lambda t: t**2))
    np.testing.assert_allclose(d.slopes, 2 * g.midpoints, atol=1e-12)


@given(horizons, steps, st.floats(-5, 5))
def test_sobolev_norm_scales_quadratically(T, n, c):
    g = TimeGrid(T, n)
    p = DiscretePath.from_function(g, lambda t: np.sin(t) + t**2)
    assert sobolev_norm_sq(p * c) == pytest.approx(c * c * sobolev_norm_sq(p), rel=1e-9, abs=1e-12)


@given(horizons, steps, st.floats(-3, 3), st.floats(-3, 3))
def test_trapezoid_is_linear(T, n, a, b):
    g = TimeGrid(T, n)
    f, h = np.cos(g.nodes), g.nodes**3
    lhs = trapezoid(a * f + b * h, g)
    rhs = a * trapezoid(f, g) + b * trapezoid(h, g)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


def test_trapezoid_exact_for_linear_and_length_checked():
    g = TimeGrid(3.0, 7)
    assert trapezoid(2 * g.nodes + 1, g) == pytest.approx(12.0, abs=1e-12)
    with pytest.raises(InvalidArgument):
        trapezoid(np.ones(5), g)


def test_path_arithmetic_checks_grid():
    a = DiscretePath.zeros(TimeGrid(1.0, 4))
    b = DiscretePath.zeros(TimeGrid(1.0, 5))
    with pytest.raises(InvalidArgument):
        a + b


@given(steps, st.integers(0, 2**32 - 1))
def test_csv_round_trip(n, seed):
    g = TimeGrid(1.5, n)
    vals = np.random.default_rng(seed).normal(size=n + 1)
    vals[0] = 0.0
    p = DiscretePath(g, vals)
    text = p.to_csv()
    assert text.startswith("t,q\n") and "\r" not in text
    back = read_path_csv(text)
    assert back.grid == g
    np.testing.assert_array_equal(back.values, p.values)


def test_write_csv_format():
    text = write_csv({"a": [0.5, 1.0], "b": [2.0, -0.25]})
    assert text == "a,b\n0.5,2.0\n1.0,-0.25\n"


def test_write_csv_keeps_integers():
    assert write_csv({"n": [100, 200], "v": [0.5, 0.25]}) == "n,v\n100,0.5\n200,0.25\n"
