import numpy as np
import pytest

from lpcoreset.generators import gaussian_matrix


@pytest.fixture
def identity3():
    return np.eye(3)


@pytest.fixture
def ones4():
    return np.ones((4, 1))


@pytest.fixture
def gaussian_200x4():
    return gaussian_matrix(200, 4, seed=0)


@pytest.fixture
def spiky_gaussian():
    """Gaussian 60 x 3 with a few rows scaled up so flattening has work to do."""
    A = gaussian_matrix(60, 3, seed=7)
    A[[3, 17, 41]] *= 12.0
    return A

