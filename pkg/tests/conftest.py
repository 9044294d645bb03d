import numpy as np
import pytest

from nonlocal_control import (build_grid, build_kernel, linear_velocity,
                              scheme_params)


@pytest.fixture(scope="session")
def V():
    return linear_velocity()


def make_setup(dx=2.2 / 121, T=0.1, eta=0.1, q_max=1.0, x_lo=-0.6, x_hi=1.6,
               dt_hint=1e-3, V=None):
    """Grid/kernel/params triple on the standard interval."""
    V = V or linear_velocity()
    g0 = build_grid(x_lo, x_hi, dx, T, dt_hint)
    kernel = build_kernel(g0, eta)
    params, grid = scheme_params(g0, kernel, V, q_max)
    return grid, kernel, params


@pytest.fixture
def coarse_setup(V):
    return make_setup(V=V)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
