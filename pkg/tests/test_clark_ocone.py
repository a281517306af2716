import numpy as np
import pytest
from hypothesis import given, strategies as st

from wiener_projection import (IntegralTerminal, InvalidArgument, Polynomial, TimeGrid,
                               ito_kernel, ito_residual, printed_cubic_kernel, sample_ensemble)

ZERO = Polynomial((0.0,))
cubic_coeffs = st.lists(st.floats(-2, 2), min_size=1, max_size=5)


def test_linear_running_cost():
    res = ito_kernel(Polynomial((0, 1)), ZERO, 2.0)
    s = np.linspace(0, 2, 7)
    np.testing.assert_allclose(res.kernel.value(s, 0.4), 2.0 - s, atol=1e-14)
    assert res.mean_C == 0.0


def test_quadratic_running_cost():
    res = ito_kernel(Polynomial((0, 0, 1)), ZERO, 1.0)
    s, x = 0.25, 1.5
    assert res.kernel.value(s, x) == pytest.approx(2 * (1 - s) * x, abs=1e-14)
    assert res.mean_C == pytest.approx(0.5)


def test_cubic_running_cost():
    res = ito_kernel(Polynomial((0, 0, 0, 1)), ZERO, 1.0)
    s, x = 0.4, -0.7
    assert res.kernel.value(s, x) == pytest.approx(1.5 * (1 - s) ** 2 + 3 * (1 - s) * x**2, abs=1e-14)
    assert "note:" in res.derivation_log


def test_terminal_cost_and_mean():
    res = ito_kernel(ZERO, Polynomial((0, 0, 0, 0, 1)), 1.5)
    s, x = 0.5, 0.3
    assert res.kernel.value(s, x) == pytest.approx(4 * x**3 + 12 * x * (1.5 - s))
    assert res.mean_C == pytest.approx(3 * 1.5**2)


def test_quartic_running_mean():
    assert ito_kernel(Polynomial((0, 0, 0, 0, 1)), ZERO, 2.0).mean_C == pytest.approx(8.0)


def test_argument_checks():
    with pytest.raises(InvalidArgument):
        ito_kernel(Polynomial((0,) * 9 + (1,)), ZERO, 1.0)
    with pytest.raises(InvalidArgument):
        ito_kernel(Polynomial((0, 1)), ZERO, 0.0)


@given(cubic_coeffs, cubic_coeffs, st.floats(-3, 3))
def test_kernel_is_linear_in_the_cost(a, b, lam):
    T = 1.0
    pa, pb = Polynomial(tuple(a)), Polynomial(tuple(b))
    combo = ito_kernel(pa * Polynomial((lam,)) + pb, ZERO, T)
    ka, kb = ito_kernel(pa, ZERO, T), ito_kernel(pb, ZERO, T)
    s, x = np.array([0.0, 0.3, 0.9]), np.array([-1.0, 0.2, 1.1])
    np.testing.assert_allclose(combo.kernel.value(s, x),
                               lam * ka.kernel.value(s, x) + kb.kernel.value(s, x),
                               rtol=1e-10, atol=1e-10)
    assert combo.mean_C == pytest.approx(lam * ka.mean_C + kb.mean_C, rel=1e-10, abs=1e-10)


def test_residual_shrinks_for_derived_kernel_only():
    cost = IntegralTerminal(Polynomial((0, 0, 0, 1)), ZERO, 1.0)
    fine = sample_ensemble(TimeGrid(1.0, 400), 4000, 5)
    exact = ito_kernel(cost.g, cost.G, 1.0)
    printed = printed_cubic_kernel(1.0)
    coarse = ito_residual(cost, exact, fine.coarsen(4))["residual_rms"]
    finer = ito_residual(cost, exact, fine)["residual_rms"]
    assert finer < 0.6 * coarse
    bad = ito_residual(cost, printed, fine)
    assert bad["residual_rms"] > 1.0 and bad["std_err"] > 0


def test_residual_for_linear_cost_is_discretisation_only():
    cost = IntegralTerminal(Polynomial((0, 1)), ZERO, 1.0)
    ens = sample_ensemble(TimeGrid(1.0, 100), 2000, 9)
    r = ito_residual(cost, ito_kernel(cost.g, cost.G, 1.0), ens)
    assert r["residual_rms"] < 0.01
