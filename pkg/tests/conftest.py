import numpy as np
import pytest
from hypothesis import settings

from tcsr.core import Pulse, SqrtScaled, SystemConfig
from tcsr.engine import HorizonPolicy

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")

# fixed horizon: no early stop, so quantities are smooth in the parameters
FIXED = HorizonPolicy(max_time=40.0, residual_cutoff=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_config(rng, n, width=10.0, gamma=0.5, G=1.0):
    return SystemConfig(rng.uniform(-width / 2, width / 2, n), SqrtScaled(G), 1.0, gamma)


def random_pulse(rng, m=20, T=10.0, scale=2.0):
    return Pulse(T, rng.normal(0.0, scale, m))
