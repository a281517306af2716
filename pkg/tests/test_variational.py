import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wiener_projection import (DiscretePath, Fixed, IntegrationDiverged, InvalidArgument,
                               LagrangianModel, ShootingFailed, SpacePoly, TimeGrid, action,
                               expression_kernel, integrate_el, lagrangian, scan_terminal, shoot)


def test_linear_kernel_optimum_is_zero(kernel_x, unit_grid):
    sol = shoot(LagrangianModel(kernel_x), unit_grid)
    assert np.max(np.abs(sol.path.values)) < 1e-12
    assert sol.action == pytest.approx(0.25, abs=1e-12)


def test_constant_kernel_recovers_identity(kernel_one, unit_grid):
    sol = shoot(LagrangianModel(kernel_one), unit_grid)
    np.testing.assert_allclose(sol.path.values, unit_grid.nodes, atol=1e-12)
    assert sol.action == pytest.approx(0.0, abs=1e-12)


def test_sine_kernel(unit_grid):
    sol = shoot(LagrangianModel(expression_kernel("sin(t)", 1.0)), unit_grid)
    np.testing.assert_allclose(sol.path.values, 1 - np.cos(unit_grid.nodes), atol=1e-8)


def test_quadratic_kernel_self_consistency(kernel_x2):
    grid = TimeGrid(1.0, 500)
    sol = shoot(LagrangianModel(kernel_x2), grid)
    assert sol.el_residual_max < 1e-4
    assert abs(sol.natural_bc_residual) < 1e-8
    assert 0.3 < sol.terminal_value < 0.33


def test_fixed_endpoint_for_zero_kernel():
    grid = TimeGrid(2.0, 100)
    model = LagrangianModel(SpacePoly([[0.0]], 2.0))
    sol = shoot(model, grid, Fixed(1.0))
    np.testing.assert_allclose(sol.path.values, grid.nodes / 2, atol=1e-12)
    # L = qdot^2 so the action is 1/2 * (1/2)^2 * 2
    assert sol.action == pytest.approx(0.25, abs=1e-12)


def test_scan_agrees_with_natural_boundary_condition(kernel_x2):
    grid = TimeGrid(1.0, 200)
    model = LagrangianModel(kernel_x2)
    scan = scan_terminal(model, grid, coarse_points=13)
    assert scan["a"] == pytest.approx(shoot(model, grid).terminal_value, abs=1e-4)


def test_integration_blow_up_is_reported():
    k = SpacePoly([[0.0]] * 4 + [[1.0]], 1.0)
    with pytest.raises(IntegrationDiverged) as info:
        integrate_el(LagrangianModel(k), 40.0, TimeGrid(1.0, 200))
    assert 0 < info.value.blowup_time <= 1.0


def test_shooting_failure_carries_diagnostics():
    k = SpacePoly([[0.0]] * 4 + [[5.0]], 3.0)
    with pytest.raises(ShootingFailed) as info:
        shoot(LagrangianModel(k), TimeGrid(3.0, 200), slope_bound=2.0)
    assert "scans" in info.value.diagnostics


def test_horizon_mismatch(kernel_x):
    with pytest.raises(InvalidArgument):
        shoot(LagrangianModel(kernel_x), TimeGrid(2.0, 10))


@given(st.floats(0, 1), st.floats(-3, 3), st.floats(-5, 5))
def test_lagrangian_nonnegative(t, q, p):
    k = SpacePoly([[0.5, 1.0], [0.0, -1.0], [1.0, 0.0]], 1.0)
    assert lagrangian(LagrangianModel(k), t, q, p) >= 0.0


def test_action_minimised_by_shooting_path(kernel_x2, unit_grid):
    model = LagrangianModel(kernel_x2)
    sol = shoot(model, unit_grid)
    rng = np.random.default_rng(0)
    for _ in range(5):
        bump = rng.normal(0, 0.05) * np.sin(math.pi * unit_grid.nodes * rng.integers(1, 4))
        other = DiscretePath(unit_grid, sol.path.values + bump)
        assert action(model, other) > sol.action
