"""Independent oracles for the test suite.

Slow, brute-force reference computations kept deliberately separate
from the library code paths they check: constrained solves go through
scipy's SLSQP, metric scores through explicit double loops and pair
counting.
"""

import itertools

import numpy as np
from scipy.optimize import minimize


def entropy_plus(p):
    p = np.asarray(p, dtype=np.float64)
    pos = p[p > 0]
    return float(pos.sum() - pos @ np.log(pos))


def row_min_transport(c_row, xi, n_starts=3, seed=0):
    """min <p, c> over the simplex with H(p) >= log(xi) + 1 (SLSQP)."""
    c_row = np.asarray(c_row, dtype=np.float64)
    n = c_row.size
    target = np.log(xi) + 1.0
    constraints = [
        {"type": "eq", "fun": lambda p: p.sum() - 1.0},
        {"type": "ineq", "fun": lambda p: entropy_plus(np.maximum(p, 0)) - target},
    ]
    bounds = [(0.0, 1.0)] * n
    rng = np.random.default_rng(seed)
    best = None
    starts = [np.full(n, 1.0 / n)]
    for _ in range(n_starts - 1):
        starts.append(rng.dirichlet(5.0 * np.ones(n)))
    for p0 in starts:
        if entropy_plus(p0) < target:
            p0 = 0.5 * p0 + 0.5 / n
        res = minimize(lambda p: p @ c_row, p0, method="SLSQP",
                       bounds=bounds, constraints=constraints,
                       options={"maxiter": 500, "ftol": 1e-12})
        if res.success and (best is None or res.fun < best.fun):
            best = res
    assert best is not None, "row transport oracle failed"
    return np.maximum(best.x, 0.0)


def min_transport_hxi(C, xi, **kw):
    """Row-separable oracle for min <P, C> over H_xi."""
    return np.stack([row_min_transport(row, xi, **kw) for row in C])


def _sym_from_triu(x, n):
    P = np.zeros((n, n))
    iu = np.triu_indices(n)
    P[iu] = x
    P.T[iu] = x
    return P


def min_transport_sea(C, xi, seed=0, n_starts=3):
    """min <P, C> over symmetric row-stochastic P with row entropies
    >= log(xi) + 1, parameterized by the upper triangle (SLSQP)."""
    C = np.asarray(C, dtype=np.float64)
    n = C.shape[0]
    target = np.log(xi) + 1.0
    iu = np.triu_indices(n)

    def unpack(x):
        return _sym_from_triu(x, n)

    def objective(x):
        return float(np.sum(unpack(x) * C))

    constraints = [
        {"type": "eq", "fun": lambda x: unpack(x).sum(axis=1) - 1.0},
        {"type": "ineq",
         "fun": lambda x: np.array([
             entropy_plus(np.maximum(row, 0)) - target
             for row in unpack(x)])},
    ]
    bounds = [(0.0, 1.0)] * iu[0].size
    rng = np.random.default_rng(seed)
    best = None
    for s in range(n_starts):
        if s == 0:
            P0 = np.full((n, n), 1.0 / n)
        else:
            A = rng.dirichlet(5.0 * np.ones(n), size=n)
            P0 = 0.25 * (A + A.T) + 0.5 / n
        res = minimize(objective, P0[iu], method="SLSQP", bounds=bounds,
                       constraints=constraints,
                       options={"maxiter": 1000, "ftol": 1e-12})
        if res.success and (best is None or res.fun < best.fun):
            best = res
    assert best is not None, "symmetric transport oracle failed"
    return np.maximum(unpack(best.x), 0.0)


def min_transport_global_entropy(C, eta, seed=0):
    """min <P, C> over symmetric doubly stochastic P with total row
    entropy >= eta (the global-entropy transport program)."""
    C = np.asarray(C, dtype=np.float64)
    n = C.shape[0]
    iu = np.triu_indices(n)

    def unpack(x):
        return _sym_from_triu(x, n)

    constraints = [
        {"type": "eq", "fun": lambda x: unpack(x).sum(axis=1) - 1.0},
        {"type": "ineq",
         "fun": lambda x: sum(entropy_plus(np.maximum(row, 0))
                              for row in unpack(x)) - eta},
    ]
    bounds = [(0.0, 1.0)] * iu[0].size
    P0 = np.full((n, n), 1.0 / n)
    res = minimize(lambda x: float(np.sum(unpack(x) * C)), P0[iu],
                   method="SLSQP", bounds=bounds, constraints=constraints,
                   options={"maxiter": 1000, "ftol": 1e-12})
    assert res.success, f"global-entropy oracle failed: {res.message}"
    return np.maximum(unpack(res.x), 0.0)


def sym_l2_projection(P, seed=0):
    """Brute-force nearest symmetric matrix in Frobenius norm."""
    P = np.asarray(P, dtype=np.float64)
    n = P.shape[0]
    iu = np.triu_indices(n)

    def unpack(x):
        return _sym_from_triu(x, n)

    x0 = P[iu]
    res = minimize(lambda x: float(((unpack(x) - P) ** 2).sum()), x0,
                   method="BFGS", options={"maxiter": 2000, "gtol": 1e-12})
    return unpack(res.x)


def pair_count_ari(a, b):
    """ARI from the explicit pair-counting contingency table."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    n = a.size

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = 0.0
    for va in np.unique(a):
        for vb in np.unique(b):
            sum_ij += comb2(np.sum((a == va) & (b == vb)))
    sum_a = sum(comb2(np.sum(a == v)) for v in np.unique(a))
    sum_b = sum(comb2(np.sum(b == v)) for v in np.unique(b))
    total = comb2(n)
    expected = sum_a * sum_b / total
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        return 1.0 if np.array_equal(a, b) else 0.0
    return float((sum_ij - expected) / (maximum - expected))


def brute_silhouette(Z, labels):
    """Double-loop silhouette; singleton clusters score zero."""
    Z = np.asarray(Z, dtype=np.float64)
    labels = np.asarray(labels).ravel()
    n = Z.shape[0]
    D = np.sqrt(((Z[:, None, :] - Z[None, :, :]) ** 2).sum(-1))
    scores = np.zeros(n)
    for i in range(n):
        same = np.flatnonzero((labels == labels[i]))
        same = same[same != i]
        if same.size == 0:
            scores[i] = 0.0
            continue
        a = D[i, same].mean()
        b = min(D[i, labels == other].mean()
                for other in np.unique(labels) if other != labels[i])
        scores[i] = (b - a) / max(a, b)
    return float(scores.mean())


def brute_trustworthiness(X, Z, k):
    """Rank-counting trustworthiness with index tie-breaking."""
    X = np.asarray(X, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    n = X.shape[0]
    DX = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    DZ = ((Z[:, None, :] - Z[None, :, :]) ** 2).sum(-1)
    total = 0.0
    for i in range(n):
        order_x = [j for j in np.argsort(DX[i], kind="stable") if j != i]
        order_z = [j for j in np.argsort(DZ[i], kind="stable") if j != i]
        rank_x = {j: r + 1 for r, j in enumerate(order_x)}
        knn_x = set(order_x[:k])
        for j in order_z[:k]:
            if j not in knn_x:
                total += rank_x[j] - k
    return float(1.0 - 2.0 / (n * k * (2 * n - 3 * k - 1)) * total)


def feasible_random_rows(n_rows, n, xi, rng):
    """Random row-stochastic matrices with row entropies above the bound,
    built by mixing Dirichlet draws toward uniform until feasible."""
    target = np.log(xi) + 1.0
    rows = []
    for _ in range(n_rows):
        row = rng.dirichlet(np.ones(n))
        t = 0.0
        while entropy_plus((1 - t) * row + t / n) < target + 1e-9:
            t = min(1.0, t + 0.05)
        rows.append((1 - t) * row + t / n)
    return np.stack(rows)
