import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("biflat", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("biflat")

EPS_FIXTURE = (-0.2, 0.3, 0.4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def eps_trajectory():
    from biflat.painleve3 import epsilon_to_fstate, integrate_fsystem

    return integrate_fsystem(epsilon_to_fstate(EPS_FIXTURE, 2.0), 5.0)


@pytest.fixture(scope="session")
def generic_trajectory():
    from biflat.painleve3 import FSystemState, epsilon_to_fstate, integrate_fsystem

    s0 = epsilon_to_fstate(EPS_FIXTURE, 2.0)
    kick = np.random.default_rng(3).standard_normal(6)
    return integrate_fsystem(FSystemState(2.0, s0.F + 0.1 * kick, s0.degrees), 5.0)


def random_eps(rng, n, avoid_total=(1.0, -1.0), margin=0.05):
    while True:
        e = rng.uniform(-0.4, 0.4, n)
        if all(abs(e.sum() - a) > margin for a in avoid_total) and np.all(np.abs(e) > 0.02):
            return tuple(e)
