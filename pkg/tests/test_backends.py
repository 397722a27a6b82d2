"""Parity between the numba kernels and the pure-numpy fallback."""

import numpy as np
import pytest

from snekhorn_kit import backends
from snekhorn_kit import _kernels_numpy as knp

numba_kernels = pytest.importorskip("snekhorn_kit._kernels_numba")


@pytest.fixture
def inputs():
    rng = np.random.default_rng(42)
    X = rng.standard_normal((30, 4))
    C = knp.pairwise_sq_dists(X)
    return X, C


def test_pairwise_parity(inputs):
    X, _ = inputs
    a = knp.pairwise_sq_dists(X)
    b = numba_kernels.pairwise_sq_dists(X)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


def test_ea_bisect_parity(inputs):
    _, C = inputs
    target = np.log(5.0) + 1.0
    ea, ga, fa = knp.ea_bisect(C, target, 1e-9, 200)
    eb, gb, fb = numba_kernels.ea_bisect(C, target, 1e-9, 200)
    assert not fa.any() and not fb.any()
    np.testing.assert_allclose(ea, eb, rtol=1e-6)
    assert ga.max() < 1e-9 and gb.max() < 1e-9


def test_ea_bisect_flags_constant_row():
    C = np.array([[1.0, 1.0, 1.0], [0.0, 1.0, 2.0], [2.0, 1.0, 0.0]])
    for mod in (knp, numba_kernels):
        _, _, flags = mod.ea_bisect(C, np.log(2.0) + 1, 1e-9, 200)
        assert flags[0] == 3 and flags[1] == 0


def test_sinkhorn_parity(inputs):
    _, C = inputs
    f0 = np.zeros(C.shape[0])
    fa, ta, ia, ca = knp.sinkhorn_symmetric(C, 1.0, f0, 1e-9, 1000)
    fb, tb, ib, cb = numba_kernels.sinkhorn_symmetric(C, 1.0, f0, 1e-9, 1000)
    assert ca and cb and ia == ib
    np.testing.assert_allclose(fa, fb, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(ta, tb, rtol=1e-6, atol=1e-12)


def test_sea_stats_parity(inputs):
    _, C = inputs
    rng = np.random.default_rng(1)
    gamma = rng.uniform(0.3, 2.0, C.shape[0])
    lam = rng.standard_normal(C.shape[0])
    for a, b in zip(knp.sea_stats(C, gamma, lam),
                    numba_kernels.sea_stats(C, gamma, lam)):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(
        knp.sea_log_primal(C, gamma, lam),
        numba_kernels.sea_log_primal(C, gamma, lam),
        rtol=1e-13, atol=0)


def test_backend_switch_roundtrip():
    original = backends.get().NAME
    try:
        backends.use("numpy")
        assert backends.get().NAME == "numpy"
        backends.use("numba")
        assert backends.get().NAME == "numba"
    finally:
        backends.use(original)


def test_backend_unknown_name_rejected():
    with pytest.raises(ValueError):
        backends.use("cupy")


def test_solver_results_match_across_backends():
    from snekhorn_kit import solve_ea, solve_sea_dual_ascent

    rng = np.random.default_rng(3)
    X = rng.standard_normal((15, 3))
    original = backends.get().NAME
    results = {}
    try:
        for name in backends.available():
            backends.use(name)
            from snekhorn_kit import pairwise_sq_euclidean

            C = pairwise_sq_euclidean(X)
            ea = solve_ea(C, 4.0)
            sea = solve_sea_dual_ascent(C, 4.0, tol=1e-7)
            results[name] = (ea.P.entries, sea.P.entries)
    finally:
        backends.use(original)
    if len(results) == 2:
        np.testing.assert_allclose(results["numpy"][0], results["numba"][0],
                                   atol=1e-8)
        np.testing.assert_allclose(results["numpy"][1], results["numba"][1],
                                   atol=1e-6)
