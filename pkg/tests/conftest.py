import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, derandomize=True, max_examples=25)
settings.load_profile("default")


def cap_points(rng, m, alpha):
    """m points uniform in (z, theta) on the cap z >= alpha."""
    z = rng.uniform(alpha, 1, m)
    th = rng.uniform(0, 2 * np.pi, m)
    r = np.sqrt(1 - z * z)
    return np.column_stack([r * np.cos(th), r * np.sin(th), z])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
