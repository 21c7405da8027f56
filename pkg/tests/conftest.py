import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from labor import erdos_renyi, from_edges  # noqa: E402


@pytest.fixture
def path_graph():
    # 0 -> 1 -> 2
    return from_edges([0, 1], [1, 2], 3)


@pytest.fixture
def er50():
    return erdos_renyi(50, 0.3, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
