import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from chaoscope.kernels import ball_seed_kernel, standard_mollifier
from chaoscope.spectral import find_admissible_a

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def ball1():
    return ball_seed_kernel(1)


@pytest.fixture(scope="session")
def ball2():
    return ball_seed_kernel(2)


@pytest.fixture(scope="session")
def moll1():
    return standard_mollifier(1)


@pytest.fixture(scope="session")
def moll2():
    return standard_mollifier(2)


@pytest.fixture(scope="session")
def cert1(ball1, moll1):
    return find_admissible_a(ball1, moll1)


@pytest.fixture(scope="session")
def cert2(ball2, moll2):
    return find_admissible_a(ball2, moll2)


def within_se(values, target, k=3.0, bias=0.0):
    v = np.asarray(values, dtype=float)
    se = v.std(ddof=1) / np.sqrt(v.size)
    return abs(v.mean() - target) <= k * se + bias, v.mean(), se
