import numpy as np
import pytest

from snekhorn_kit import (
    Affinity,
    AffinityKind,
    ValidationError,
    calibrate_rs_nu,
    entropy,
    perplexity,
    row_entropies,
    row_stochastic_gaussian,
    solve_ea,
    symmetrize_l2,
)
from conftest import random_cost
import oracles


def scalar_bisect_eps(row, xi, tol=1e-12):
    """1-D oracle: bisection on the bandwidth of a single row."""
    target = np.log(xi) + 1.0

    def H(eps):
        z = -np.asarray(row) / eps
        z = z - z.max()
        p = np.exp(z) / np.exp(z).sum()
        return entropy(p)

    lo, hi = 1e-9, 1e9
    for _ in range(300):
        mid = np.sqrt(lo * hi)
        if H(mid) < target:
            lo = mid
        else:
            hi = mid
        if abs(H(mid) - target) < tol:
            return mid
    return np.sqrt(lo * hi)


def all_equal_cost(n, c):
    return c * (np.ones((n, n)) - np.eye(n))


class TestSolveEA:
    def test_row_bandwidth_matches_scalar_oracle(self):
        C = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]])
        sol = solve_ea(C, 2.0, tol=1e-11)
        want = scalar_bisect_eps(C[0], 2.0)
        assert sol.epsilon[0] == pytest.approx(want, rel=1e-6)
        assert sol.residuals.max() < 1e-9

    def test_all_equal_offdiagonal_rows_identical(self):
        n, c, xi = 6, 2.5, 3.0
        sol = solve_ea(all_equal_cost(n, c), xi)
        P = sol.P.entries
        a, b = P[0, 0], P[0, 1]
        assert a + (n - 1) * b == pytest.approx(1.0, abs=1e-12)
        assert entropy(P[0]) == pytest.approx(np.log(xi) + 1, abs=1e-9)
        for i in range(1, n):
            assert P[i, i] == pytest.approx(a, rel=1e-9)
            off = P[i][np.arange(n) != i]
            np.testing.assert_allclose(off, b, rtol=1e-9)

    def test_perplexity_saturated(self):
        C = random_cost(25, seed=0)
        sol = solve_ea(C, 7.0)
        for row in sol.P.entries:
            assert perplexity(row) == pytest.approx(7.0, abs=1e-6)

    @pytest.mark.parametrize("xi", [0.5, 25.0, 30.0])
    def test_perplexity_out_of_range(self, xi):
        C = random_cost(25, seed=1)
        if 1 <= xi <= 24:
            return
        with pytest.raises(ValidationError, match="perplexity out of range"):
            solve_ea(C, xi)

    def test_bandwidth_entropy_monotone(self):
        rng = np.random.default_rng(2)
        row = np.concatenate([[0.0], rng.uniform(0.5, 5.0, 9)])

        def H(eps):
            z = -row / eps
            z -= z.max()
            p = np.exp(z) / np.exp(z).sum()
            return entropy(p)

        grid = np.geomspace(1e-3, 1e3, 25)
        values = np.array([H(eps) for eps in grid])
        assert np.all(np.diff(values) >= 0)
        # strict increase away from the floating-point saturation ends
        interior = (values > 1 + 1e-9) & (values < np.log(10) + 1 - 1e-9)
        assert np.all(np.diff(values[interior]) > 0)

    def test_transport_oracle_equivalence(self):
        rng = np.random.default_rng(3)
        for seed, xi in [(0, 2.0), (1, 3.0), (2, 2.0)]:
            n = int(rng.integers(4, 7))
            C = random_cost(n, seed=seed + 10)
            sol = solve_ea(C, xi)
            got = float(np.sum(sol.P.entries * C.entries))
            oracle_P = oracles.min_transport_hxi(C.entries, xi)
            want = float(np.sum(oracle_P * C.entries))
            assert got <= want * (1 + 1e-6) + 1e-12
            gaps = np.abs(row_entropies(oracle_P) - (np.log(xi) + 1))
            assert gaps.max() < 1e-5

    def test_row_separability_permutation(self):
        C = random_cost(8, seed=4)
        sol = solve_ea(C, 3.0)
        perm = np.random.default_rng(5).permutation(8)
        Cp = C.entries[np.ix_(perm, perm)]
        solp = solve_ea(Cp, 3.0)
        np.testing.assert_allclose(
            solp.P.entries, sol.P.entries[np.ix_(perm, perm)], atol=1e-12)

    def test_exclude_self_zero_diagonal(self):
        C = random_cost(10, seed=6)
        sol = solve_ea(C, 4.0, exclude_self=True)
        P = sol.P.entries
        assert np.all(np.diag(P) == 0)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(row_entropies(P), np.log(4.0) + 1,
                                   atol=1e-9)


class TestKLProjectionLink:
    def test_projection_recovers_ea(self):
        # KL projection of exp(-C/sigma) onto the entropy set equals the
        # entropic affinity whenever sigma is below every row bandwidth
        from snekhorn_kit import kl_project_hxi

        C = random_cost(10, seed=7)
        xi = 4.0
        sol = solve_ea(C, xi, tol=1e-12)
        sigma = 0.9 * sol.epsilon.min()
        K = np.exp(-C.entries / sigma)
        proj = kl_project_hxi(K, xi, tol=1e-12)
        np.testing.assert_allclose(proj, sol.P.entries, atol=1e-6)


class TestSymmetrize:
    def test_symmetric_fixed_point(self):
        S = np.array([[0.6, 0.4], [0.4, 0.6]])
        np.testing.assert_array_equal(symmetrize_l2(S), S)

    def test_hand_example(self):
        got = symmetrize_l2(np.array([[0.9, 0.1], [0.5, 0.5]]))
        np.testing.assert_allclose(got, [[0.9, 0.3], [0.3, 0.5]], atol=0)

    def test_matches_projection_oracle(self):
        rng = np.random.default_rng(8)
        P = rng.dirichlet(np.ones(3), size=3)
        got = symmetrize_l2(P)
        want = oracles.sym_l2_projection(P)
        np.testing.assert_allclose(got, want, atol=1e-6)

    def test_affinity_kind_mapping(self):
        C = random_cost(5, seed=9)
        ea = solve_ea(C, 2.0)
        sym = symmetrize_l2(ea.P)
        assert sym.kind == AffinityKind.EA_SYM
        rs = row_stochastic_gaussian(C, 1.0)
        assert symmetrize_l2(rs).kind == AffinityKind.RS_SYM


class TestRowStochasticGaussian:
    def test_all_equal_ratio(self):
        n, c, nu = 5, 2.0, 0.7
        P = row_stochastic_gaussian(all_equal_cost(n, c), nu).entries
        assert P[0, 0] / P[0, 1] == pytest.approx(np.exp(c / nu), rel=1e-12)

    def test_large_bandwidth_uniform_limit(self):
        C = random_cost(6, seed=10)
        P = row_stochastic_gaussian(C, 1e12).entries
        assert np.abs(P - 1 / 6).max() < 1e-9

    def test_matches_direct_evaluation(self):
        C = random_cost(4, seed=11)
        P = row_stochastic_gaussian(C, 1.0).entries
        K = np.exp(-C.entries)
        np.testing.assert_allclose(P, K / K.sum(axis=1, keepdims=True),
                                   atol=1e-12)

    def test_invalid_bandwidth(self):
        with pytest.raises(ValidationError):
            row_stochastic_gaussian(random_cost(4, 0), -1.0)


def test_calibrate_rs_nu_hits_target():
    C = random_cost(20, seed=12)
    nu, P = calibrate_rs_nu(C, 6.0)
    mean_perp = np.exp(row_entropies(P.entries).mean() - 1)
    assert mean_perp == pytest.approx(6.0, abs=1e-4)
    assert nu > 0
