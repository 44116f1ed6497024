import numpy as np
import pytest

from heatsense.cases import build_cloud, build_operator, heat1d_case
from heatsense.criterion import FitnessContext


@pytest.fixture(scope="session")
def heat1d_full():
    """The full benchmark case (n=400, m=25) with its cloud and operator."""
    case = heat1d_case()
    cloud = build_cloud(case)
    op = build_operator(case, cloud)
    return case, cloud, op


@pytest.fixture(scope="session")
def heat1d_small():
    """A fast variant (n=60, m=9) for solver-level tests."""
    case = heat1d_case(n=60, m=9)
    cloud = build_cloud(case)
    op = build_operator(case, cloud)
    return case, cloud, op


@pytest.fixture(scope="session")
def heat1d_toy_ctx():
    """Tiny instance (n=12, m=7) where exhaustive search is feasible."""
    case = heat1d_case(n=12, m=7)
    op = build_operator(case)
    return case, FitnessContext(op, gamma=1.0)


def rng(seed=0):
    return np.random.default_rng(seed)
