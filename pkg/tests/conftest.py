import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from asv_inekf.liegroup import ExtendedPose, so3_exp

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_rotation(rng, max_angle=3.0):
    w = rng.standard_normal(3)
    w *= rng.uniform(0.0, max_angle) / np.linalg.norm(w)
    return so3_exp(w)


def random_pose(rng, max_angle=3.0, scale=5.0):
    return ExtendedPose(random_rotation(rng, max_angle), scale * rng.standard_normal(3), scale * rng.standard_normal(3))


def random_spd(rng, n, scale=1.0, floor=0.05):
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T / n + floor * np.eye(n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
