import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from snekhorn_kit import backends, pairwise_sq_euclidean


def random_cost(n, seed, p=3):
    """Random cost matrix in D from Gaussian points."""
    rng = np.random.default_rng(seed)
    return pairwise_sq_euclidean(rng.standard_normal((n, p)))


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger JIT compilation once so timed tests measure algorithms."""
    K = backends.get()
    X = np.random.default_rng(0).standard_normal((4, 2))
    D = K.pairwise_sq_dists(X)
    K.ea_bisect(D, np.log(2.0) + 1.0, 1e-9, 200)
    K.sinkhorn_symmetric(D, 1.0, np.zeros(4), 1e-6, 100)
    K.sea_stats(D, np.ones(4), np.zeros(4))
    K.sea_log_primal(D, np.ones(4), np.zeros(4))
    yield
