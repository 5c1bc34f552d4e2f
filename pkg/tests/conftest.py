import numpy as np
import pytest

from srptlab.dists import ParetoTypeI


@pytest.fixture
def pareto12():
    return ParetoTypeI(1.0, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
