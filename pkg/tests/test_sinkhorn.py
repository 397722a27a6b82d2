import warnings

import numpy as np
import pytest
from scipy.optimize import brentq

from snekhorn_kit import (
    SolverError,
    calibrate_nu,
    global_entropy,
    row_entropies,
    solve_sinkhorn_symmetric,
)
from snekhorn_kit.datasets import gen_three_gaussians
from snekhorn_kit.core import pairwise_sq_euclidean
from conftest import random_cost
import oracles


def all_equal_cost(n, c):
    return c * (np.ones((n, n)) - np.eye(n))


def mixture_cost(n, seed):
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.concatenate([rng.standard_normal((half, 3)),
                        rng.standard_normal((n - half, 3)) + 4.0])
    return pairwise_sq_euclidean(X)


class TestSolve:
    def test_all_equal_closed_form(self):
        n, c = 6, 1.7
        sol = solve_sinkhorn_symmetric(all_equal_cost(n, c), nu=1.0,
                                       tol=1e-12)
        # permutation symmetry forces a constant potential:
        # u^2 (1 + (n-1) e^{-c}) = 1
        u2 = 1.0 / (1 + (n - 1) * np.exp(-c))
        np.testing.assert_allclose(sol.f, sol.f[0], atol=1e-12)
        assert sol.P.entries[0, 0] == pytest.approx(u2, rel=1e-10)
        assert sol.P.entries[0, 1] == pytest.approx(u2 * np.exp(-c),
                                                    rel=1e-10)

    def test_warm_start_fixed_point(self):
        C = mixture_cost(20, seed=0)
        sol = solve_sinkhorn_symmetric(C, tol=1e-10)
        warm = solve_sinkhorn_symmetric(C, tol=1e-10, f_init=sol.f)
        assert warm.iters <= 1

    def test_mixture_converges_fast(self):
        C = mixture_cost(20, seed=1)
        sol = solve_sinkhorn_symmetric(C, nu=1.0, tol=1e-6)
        assert sol.iters <= 50

    def test_double_stochasticity_both_sides(self):
        C = mixture_cost(17, seed=2)
        sol = solve_sinkhorn_symmetric(C, tol=1e-8)
        P = sol.P.entries
        assert np.abs(P.sum(axis=1) - 1).max() <= 1e-8
        assert np.abs(P.sum(axis=0) - 1).max() <= 1e-8
        assert np.array_equal(P, P.T)
        assert np.all(P > 0)
        assert P.max() <= 1 + 2e-8

    def test_zero_init_and_warm_start_agree(self):
        C = mixture_cost(15, seed=3)
        a = solve_sinkhorn_symmetric(C, tol=1e-10)
        b = solve_sinkhorn_symmetric(C, tol=1e-10)
        rng = np.random.default_rng(0)
        c = solve_sinkhorn_symmetric(C, tol=1e-10,
                                     f_init=a.f + 0.1 * rng.standard_normal(15))
        np.testing.assert_allclose(a.P.entries, b.P.entries, atol=0)
        np.testing.assert_allclose(a.P.entries, c.P.entries, atol=1e-8)

    def test_residual_decreases_after_first_iteration(self):
        # fast convergence is asserted; monotonicity only warns
        for seed in range(5):
            sol = solve_sinkhorn_symmetric(mixture_cost(12, seed), tol=1e-9)
            diffs = np.diff(sol.residual_trace[1:])
            if diffs.size and diffs.max() > 0:
                warnings.warn(
                    f"non-monotone Sinkhorn residual at seed {seed}")

    def test_nonconvergence_error_carries_trace(self):
        C = mixture_cost(12, seed=4)
        with pytest.raises(SolverError) as err:
            solve_sinkhorn_symmetric(C, nu=1.0, tol=1e-12, max_iter=2)
        assert "residual_trace" in err.value.diagnostics

    def test_entropy_constrained_transport_oracle(self):
        # the converged plan minimizes <P, C> among symmetric stochastic
        # plans with the same global entropy
        C = random_cost(5, seed=5)
        sol = solve_sinkhorn_symmetric(C, nu=0.8, tol=1e-10)
        eta = global_entropy(sol.P)
        got = float(np.sum(sol.P.entries * C.entries))
        oracle_P = oracles.min_transport_global_entropy(C.entries, eta)
        want = float(np.sum(oracle_P * C.entries))
        assert abs(got - want) <= 1e-5 * max(abs(want), 1.0)


class TestGlobalEntropy:
    def test_uniform(self):
        n = 7
        P = np.full((n, n), 1 / n)
        assert global_entropy(P) == pytest.approx(n * (np.log(n) + 1),
                                                  rel=1e-12)

    def test_identity(self):
        assert global_entropy(np.eye(6)) == pytest.approx(6.0)

    def test_consistency_with_row_entropies(self):
        rng = np.random.default_rng(6)
        P = rng.dirichlet(np.ones(8), size=8)
        assert global_entropy(P) == pytest.approx(row_entropies(P).sum(),
                                                  abs=1e-12)


class TestCalibrate:
    def test_mean_entropy_monotone_in_nu(self):
        C = mixture_cost(15, seed=7)
        means = []
        for nu in np.geomspace(0.1, 100, 8):
            sol = solve_sinkhorn_symmetric(C, nu=nu, tol=1e-9)
            means.append(row_entropies(sol.P.entries).mean())
        assert np.all(np.diff(means) > 0)

    def test_all_equal_matches_scalar_oracle(self):
        n, c, xi = 8, 2.0, 4.0
        C = all_equal_cost(n, c)

        def mean_entropy_gap(nu):
            from scipy.special import xlogy

            u2 = 1.0 / (1 + (n - 1) * np.exp(-c / nu))
            p_diag, p_off = u2, u2 * np.exp(-c / nu)
            H = (p_diag + (n - 1) * p_off
                 - xlogy(p_diag, p_diag) - (n - 1) * xlogy(p_off, p_off))
            return H - (np.log(xi) + 1)

        want = brentq(mean_entropy_gap, 1e-2, 1e3, xtol=1e-12)
        nu, _ = calibrate_nu(C, xi, tol=1e-9)
        assert nu == pytest.approx(want, rel=1e-4)

    def test_heterogeneous_spread_with_matched_mean(self):
        ds = gen_three_gaussians(n_per=25, stds=(0.3, 1.0, 2.0), seed=0)
        C = pairwise_sq_euclidean(ds.X)
        nu, sol = calibrate_nu(C, 5.0, tol=1e-8)
        entropies = row_entropies(sol.P.entries)
        # the calibration matches the mean entropy, so exp(mean H - 1)
        # hits the target; the per-point perplexities still spread
        assert np.exp(entropies.mean() - 1) == pytest.approx(5.0, abs=1e-3)
        perps = np.exp(entropies - 1)
        assert perps.std() > 0.1

    def test_rejects_out_of_range_target(self):
        from snekhorn_kit import ValidationError

        with pytest.raises(ValidationError):
            calibrate_nu(random_cost(6, 0), 6.0)
