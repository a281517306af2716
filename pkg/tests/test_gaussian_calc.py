import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wiener_projection import (EvaluationError, InvalidArgument, Polynomial, expect_function,
                               expect_polynomial, gauss_hermite, gaussian_moment)
from wiener_projection.gaussian_calc import gaussian_smoothing

means = st.floats(-3, 3)
variances = st.floats(0, 4)
coeff_lists = st.lists(st.floats(-2, 2), min_size=1, max_size=7)


def _double_factorial(k):
    return math.prod(range(k, 0, -2)) if k > 0 else 1


@pytest.mark.parametrize("k", range(0, 13))
def test_centred_moments(k):
    want = 0.0 if k % 2 else _double_factorial(k - 1) * 1.7 ** (k // 2)
    assert gaussian_moment(k, 0.0, 1.7) == pytest.approx(want, rel=1e-13)


def test_noncentral_moments_against_binomial_expansion():
    m, v = 0.7, 2.3
    for k in range(9):
        want = sum(math.comb(k, j) * m ** (k - j) * gaussian_moment(j, 0.0, v)
                   for j in range(k + 1))
        assert gaussian_moment(k, m, v) == pytest.approx(want, rel=1e-12)


@given(st.integers(0, 6).map(lambda j: 2 * j + 1), variances)
def test_odd_central_moments_vanish(k, v):
    assert gaussian_moment(k, 0.0, v) == 0.0


def test_moment_argument_checks():
    with pytest.raises(InvalidArgument):
        gaussian_moment(2, 0.0, -1.0)
    with pytest.raises(InvalidArgument):
        gaussian_moment(-1, 0.0, 1.0)


def test_polynomial_algebra():
    p = Polynomial((1.0, 2.0, 3.0))
    assert p.degree == 2
    assert p.deriv().coeffs == (2.0, 6.0)
    assert (p * p)(1.5) == pytest.approx(p(1.5) ** 2)
    assert (p - p).is_zero()
    with pytest.raises(InvalidArgument):
        Polynomial((0.0,) * 18 + (1.0,))


@given(coeff_lists, means, variances)
def test_quadrature_matches_exact_polynomial_expectation(c, m, v):
    p = Polynomial(tuple(c))
    exact = expect_polynomial(p, m, v)
    quad = expect_function(p, m, v, gauss_hermite(20))
    assert quad == pytest.approx(exact, rel=1e-9, abs=1e-9)


@given(coeff_lists, means, st.floats(0.01, 4))
def test_jensen_for_squares(c, m, v):
    p = Polynomial(tuple(c))
    assert expect_polynomial(p * p, m, v) >= expect_polynomial(p, m, v) ** 2 - 1e-9


def test_smoothing_table_reproduces_expectations():
    c = (0.3, -1.0, 0.5, 2.0)
    S = gaussian_smoothing(c)
    for x in (-1.0, 0.2, 1.4):
        for v in (0.0, 0.5, 2.0):
            val = sum(S[i, j] * x**i * v**j for i in range(S.shape[0]) for j in range(S.shape[1]))
            assert val == pytest.approx(expect_polynomial(Polynomial(c), x, v), rel=1e-12)


def test_expect_function_broadcasts_and_handles_zero_variance():
    out = expect_function(np.cos, np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    assert out[0] == pytest.approx(math.exp(-0.5), rel=1e-12)
    assert out[1] == pytest.approx(math.cos(1.0), rel=1e-15)
    const = expect_function(lambda y: 3.0, np.zeros(3), np.ones(3))
    np.testing.assert_allclose(const, 3.0)


def test_expect_function_rejects_non_finite():
    with np.errstate(divide="ignore"), pytest.raises(EvaluationError):
        expect_function(lambda y: 1.0 / (y - y), 0.0, 1.0)


@pytest.mark.parametrize("order", [0, 65])
def test_quadrature_order_range(order):
    with pytest.raises(InvalidArgument):
        gauss_hermite(order)


def test_quadrature_rule_is_symmetric_and_normalised():
    rule = gauss_hermite(21)
    np.testing.assert_allclose(rule.nodes, -rule.nodes[::-1], atol=0)
    assert np.sum(rule.weights) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
