import numpy as np
import pytest

from vropt.composite import make_composite_quadratic
from vropt.harness.config import make_multiblock
from vropt.problems import make_random_quadratic_sum, make_weighted_glm


@pytest.fixture(scope="session")
def small_ls():
    return make_weighted_glm(60, 8, 1e-2, "squared", seed=11)


@pytest.fixture(scope="session")
def small_logistic():
    return make_weighted_glm(60, 8, 1e-2, "logistic", seed=12)


@pytest.fixture(scope="session")
def quad_sum_m5():
    return make_random_quadratic_sum(5, 6, seed=4)


@pytest.fixture(scope="session")
def multiblock_small():
    return make_multiblock(4, 5, 1e-2, seed=9)


@pytest.fixture(scope="session")
def composite_small():
    # generation runs a Newton solve plus constant certification; share per test
    return make_composite_quadratic(6, 5, seed=2, mu_min=1e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(123)
