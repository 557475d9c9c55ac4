import logging

import pytest

from circlift.grid import make_domain
from circlift.solver import SolveConfig


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance scale runs, deselect with -m 'not slow'")


@pytest.fixture(autouse=True)
def _debug_logger():
    logging.getLogger('circlift').setLevel(logging.DEBUG)
    yield


@pytest.fixture
def unit_square_3():
    return make_domain("square(1)", 3)


@pytest.fixture
def unit_square_17():
    return make_domain("square(1)", 17)


@pytest.fixture
def disk_33():
    return make_domain("disk(0,0,1)", 33)


@pytest.fixture
def disk_65():
    return make_domain("disk(0,0,1)", 65)


@pytest.fixture
def disk_129():
    return make_domain("disk(0,0,1)", 129)


@pytest.fixture
def solve_cfg():
    def build(schedule, **kwargs):
        kwargs.setdefault('max_outer_iters', 30)
        kwargs.setdefault('energy_tol', 1e-6)
        return SolveConfig(eps_schedule=schedule, **kwargs)
    return build
