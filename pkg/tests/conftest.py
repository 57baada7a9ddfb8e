import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def seed():
    return 20240601


def mean_ci(x, z=3.0):
    x = np.asarray(x, dtype=float)
    m = x.mean()
    se = x.std(ddof=1) / np.sqrt(x.size)
    return m, z * se


def dkw_band(n, alpha=0.01):
    return np.sqrt(np.log(2.0 / alpha) / (2.0 * n))
