import pytest

from endowment_hedge import fd
from endowment_hedge.model import default_parameters


@pytest.fixture(scope="session")
def grid():
    return fd.build_grid()


@pytest.fixture(scope="session")
def coarse_grid():
    return fd.build_grid(8.0, 160, 200, 10.0)


@pytest.fixture
def base():
    """Default parameter set at lambda_p0 = 0.06, rho = 0, q = 0."""
    return default_parameters(0.06)
