import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from translab.spaces import Ball

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


def ball(c, r):
    return Ball(np.atleast_1d(np.asarray(c, dtype=float)), r)


@pytest.fixture
def mkball():
    return ball
