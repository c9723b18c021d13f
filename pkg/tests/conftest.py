import time

import pytest

from eqdiscover.datasets import generate_odebench, generate_pde
from eqdiscover.expressions import SymbolLibrary


@pytest.fixture(scope="session")
def generation_seconds():
    """Wall-clock generation time per PDE system, for the runtime criteria."""
    return {}


def _timed_grid(name, times):
    start = time.perf_counter()
    grid = generate_pde(name)
    times[name] = time.perf_counter() - start
    return grid


@pytest.fixture(scope="session")
def burgers(generation_seconds):
    return _timed_grid("burgers", generation_seconds)


@pytest.fixture(scope="session")
def chafee(generation_seconds):
    return _timed_grid("chafee-infante", generation_seconds)


@pytest.fixture(scope="session")
def ks(generation_seconds):
    return _timed_grid("ks", generation_seconds)


@pytest.fixture(scope="session")
def divide(generation_seconds):
    return _timed_grid("pde-divide", generation_seconds)


@pytest.fixture(scope="session")
def fisher(generation_seconds):
    return _timed_grid("fisher-kpp", generation_seconds)


@pytest.fixture(scope="session")
def ode1_train():
    return generate_odebench(1, "train")


@pytest.fixture(scope="session")
def ode16_train():
    return generate_odebench(16, "train")


@pytest.fixture(scope="session")
def ode16_test():
    return generate_odebench(16, "test")


@pytest.fixture
def pde_lib():
    return SymbolLibrary.pde_default()


@pytest.fixture
def ode_lib():
    return SymbolLibrary.ode_default()
