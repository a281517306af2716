import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wiener_projection import DeterministicPoly, Polynomial, SpacePoly, TimeGrid

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile("default")


@pytest.fixture
def unit_grid():
    return TimeGrid(1.0, 200)


@pytest.fixture
def kernel_x():
    return SpacePoly([[0.0], [1.0]], 1.0)


@pytest.fixture
def kernel_x2():
    return SpacePoly([[0.0], [0.0], [1.0]], 1.0)


@pytest.fixture
def kernel_one():
    return DeterministicPoly(Polynomial((1.0,)), 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
