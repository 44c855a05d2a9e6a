import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nlscontrol.spectral import TorusGrid

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture
def grid16():
    return TorusGrid(16)


@pytest.fixture
def grid64():
    return TorusGrid(64)
