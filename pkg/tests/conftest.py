import numpy as np
import pytest
from scipy.optimize import bisect

from rayleigh_jost.medium import ElasticProfile, HalfSpaceConstants, PotentialSpec, TransformData
from rayleigh_jost.pm_transform import ThetaMatrix, TransformedModel
from rayleigh_jost.rayleigh_ode import DisplacementModel

TEST_MATRIX = [[0.3, 0.5], [0.2, -0.4]]

ACCEPTANCE_LINES = []


def rayleigh_root_oracle(mu=1.0, omega=1.0):
    """xi_R = omega / (c_R sqrt(mu)), c_R^2 the root in (0, 1) of 3x^3 - 24x^2 + 56x - 32."""
    x = bisect(lambda x: 3 * x**3 - 24 * x**2 + 56 * x - 32, 1e-6, 1 - 1e-9, xtol=1e-15)
    return omega / (np.sqrt(x) * np.sqrt(mu))


@pytest.fixture(scope="session")
def unit_constants():
    return HalfSpaceConstants(1.0, 1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def homogeneous_profile(unit_constants):
    return ElasticProfile.constant(unit_constants)


@pytest.fixture(scope="session")
def homogeneous_model(homogeneous_profile):
    return DisplacementModel(homogeneous_profile)


def make_transformed(constants, matrix=TEST_MATRIX, start=0.5, td=None, mode="ode"):
    prof = ElasticProfile.constant(constants)
    td = td or TransformData.surface_normalized(constants)
    V = PotentialSpec.bump(constants.H, start, matrix) if matrix is not None \
        else PotentialSpec.zero(constants.H)
    return TransformedModel(td, V, ThetaMatrix.from_profile(prof), prof.mu0, prof.mu0_x,
                            mode=mode, c0=prof.c0)


@pytest.fixture(scope="session")
def bump_model(unit_constants):
    return make_transformed(unit_constants)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
