"""Shared fixtures: small grids, solved equilibria, and the field corpus.

Session scope everywhere; everything here is read-only for the tests.
"""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lfdlab.equilibrium import (GasMoments, evaluate_equilibrium,
                                saturation_threshold, solve_fermi_dirac)
from lfdlab.grid import DistributionField, VelocityGrid

settings.register_profile(
    "lab", deadline=None, max_examples=20,
    suppress_health_check=[HealthCheck.too_slow,
                           HealthCheck.function_scoped_fixture])
settings.load_profile("lab")


@pytest.fixture(scope="session")
def moments11():
    return GasMoments(rho=1.0, E=1.0)


@pytest.fixture(scope="session")
def thresholds11(moments11):
    return saturation_threshold(moments11)


@pytest.fixture(scope="session")
def grid8():
    return VelocityGrid(8, 4.0)


@pytest.fixture(scope="session")
def grid12():
    return VelocityGrid(12, 6.0)


@pytest.fixture(scope="session")
def grid16():
    return VelocityGrid(16, 6.0)


@pytest.fixture(scope="session")
def grid32():
    return VelocityGrid(32, 8.0)


@pytest.fixture(scope="session")
def params_eps02(moments11):
    return solve_fermi_dirac(moments11, 0.2)


@pytest.fixture(scope="session")
def equilibrium16(params_eps02, grid16):
    return evaluate_equilibrium(params_eps02, grid16)


@pytest.fixture(scope="session")
def maxwellian16(moments11, grid16):
    params = solve_fermi_dirac(moments11, 0.0)
    return evaluate_equilibrium(params, grid16)


def gaussian_field(grid, rho, theta, eps):
    values = rho * (2.0 * np.pi * theta) ** -1.5 * np.exp(
        -grid.v2 / (2.0 * theta))
    return DistributionField(grid, values, eps)


@pytest.fixture(scope="session")
def bimodal16(grid16):
    g = grid16
    values = 0.5 * (2.0 * np.pi * 0.5) ** -1.5 * np.exp(-g.v2) \
        + 0.5 * (2.0 * np.pi * 1.5) ** -1.5 * np.exp(-g.v2 / 3.0)
    return DistributionField(g, values, 0.05)
