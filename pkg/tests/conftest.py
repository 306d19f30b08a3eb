import numpy as np
import pytest

from planarquad.dynamics import RobotModel, SimConfig


@pytest.fixture(scope="session")
def model():
    return RobotModel()


@pytest.fixture(scope="session")
def sim_config():
    return SimConfig()


def random_configuration(rng: np.random.Generator) -> np.ndarray:
    """A generic valid 11-vector of generalized positions."""
    q = np.empty(11)
    q[0] = rng.uniform(-1.0, 1.0)
    q[1] = rng.uniform(0.3, 0.8)
    q[2] = rng.uniform(-0.5, 0.5)
    q[3::2] = rng.uniform(-1.2, 1.2, size=4)   # hips
    q[4::2] = rng.uniform(0.3, 2.8, size=4)    # knees, away from singularity
    return q
