import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from omniflow import wkb2d
from omniflow.polynomials import parse_polynomial

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def cubic_patch():
    """WKB patch for q1q2 + 0.3 q1^3 on [-1, 1]^2 (independent of kappa, so built once)."""
    return wkb2d.build_patch(parse_polynomial("q1q2 + 0.3q1^3", 2))


@pytest.fixture(scope="session")
def saddle_patch():
    from omniflow.config import WkbConfig

    return wkb2d.build_patch(parse_polynomial("q1q2", 2), WkbConfig(grid_n=41))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
