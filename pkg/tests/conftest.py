import numpy as np
import pytest

from annealrbm.rbm import RbmParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_params():
    return RbmParams.random(3, 3, np.random.default_rng(7), scale=1.0)


@pytest.fixture
def strong_params():
    """3x3 RBM whose mass sits on the all-ones state, far from the all-zeros state."""
    return RbmParams(2.0 * np.ones((3, 3)), -np.ones(3), -np.ones(3))
