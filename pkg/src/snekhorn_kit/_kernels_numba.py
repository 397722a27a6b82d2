"""Numba-compiled twins of the `_kernels_numpy` hot kernels.

Same signatures and semantics as the numpy backend; loops are written
out so rows never allocate temporaries.  fastmath stays off: results
must track the numpy backend to rounding error.
"""

import numpy as np
from numba import njit

NAME = "numba"

_JIT = {"cache": True, "nogil": True}


@njit(**_JIT)
def pairwise_sq_dists(X):
    n, p = X.shape
    D = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(p):
                d = X[i, k] - X[j, k]
                acc += d * d
            D[i, j] = acc
            D[j, i] = acc
    return D


@njit(**_JIT)
def _row_softmax_entropy(row, eps):
    n = row.shape[0]
    zmax = -row[0] / eps
    for j in range(1, n):
        z = -row[j] / eps
        if z > zmax:
            zmax = z
    s = 0.0
    sz = 0.0
    for j in range(n):
        z = -row[j] / eps
        e = np.exp(z - zmax)
        s += e
        sz += e * z
    return zmax + np.log(s) - sz / s + 1.0


@njit(**_JIT)
def ea_bisect(C, target, tol, max_iter):
    n = C.shape[0]
    eps = np.ones(n, dtype=np.float64)
    gap = np.full(n, np.inf, dtype=np.float64)
    flags = np.zeros(n, dtype=np.int8)
    for i in range(n):
        lo_v = C[i, 0]
        hi_v = C[i, 0]
        for j in range(1, n):
            if C[i, j] < lo_v:
                lo_v = C[i, j]
            if C[i, j] > hi_v:
                hi_v = C[i, j]
        scale = hi_v - lo_v
        if scale == 0.0:
            flags[i] = 3
            continue
        row = C[i] - lo_v
        lo = 1e-12 * scale
        hi = 1e4 * scale
        ok = True
        k = 0
        while _row_softmax_entropy(row, lo) - target > 0.0:
            lo *= 0.1
            k += 1
            if k >= 200:
                ok = False
                break
        k = 0
        while ok and _row_softmax_entropy(row, hi) - target < 0.0:
            hi *= 10.0
            k += 1
            if k >= 200:
                ok = False
                break
        if not ok:
            flags[i] = 1
            continue
        g = np.inf
        mid = np.sqrt(lo * hi)
        for _ in range(max_iter):
            mid = np.sqrt(lo * hi)
            g = _row_softmax_entropy(row, mid) - target
            if abs(g) < tol:
                break
            if g < 0.0:
                lo = mid
            else:
                hi = mid
        eps[i] = mid
        gap[i] = abs(g)
        if gap[i] >= tol:
            flags[i] = 2
    return eps, gap, flags


@njit(**_JIT)
def sinkhorn_symmetric(C, nu, f0, tol, max_iter):
    n = C.shape[0]
    f = f0.copy()
    g = np.empty(n, dtype=np.float64)
    trace = np.empty(max_iter + 1, dtype=np.float64)
    converged = False
    iters = 0
    for k in range(max_iter + 1):
        for i in range(n):
            m = (f[0] - C[i, 0]) / nu
            for j in range(1, n):
                a = (f[j] - C[i, j]) / nu
                if a > m:
                    m = a
            s = 0.0
            for j in range(n):
                s += np.exp((f[j] - C[i, j]) / nu - m)
            g[i] = nu * (m + np.log(s))
        res = 0.0
        for i in range(n):
            r = abs(np.exp((f[i] + g[i]) / nu) - 1.0)
            if r > res:
                res = r
        trace[k] = res
        iters = k
        if res <= tol:
            converged = True
            break
        if k == max_iter:
            break
        for i in range(n):
            f[i] = 0.5 * (f[i] - g[i])
    return f, trace[: iters + 1].copy(), iters, converged


@njit(**_JIT)
def sea_stats(C, gamma, lam):
    # log entries capped at 50, matching the numpy backend
    n = C.shape[0]
    row_sum = np.empty(n, dtype=np.float64)
    row_ent = np.empty(n, dtype=np.float64)
    row_cost = np.empty(n, dtype=np.float64)
    for i in range(n):
        m = -np.inf
        for j in range(n):
            lp = (lam[i] + lam[j] - 2.0 * C[i, j]) / (gamma[i] + gamma[j])
            if lp > 50.0:
                lp = 50.0
            if lp > m:
                m = lp
        s = 0.0
        slog = 0.0
        scost = 0.0
        for j in range(n):
            lp = (lam[i] + lam[j] - 2.0 * C[i, j]) / (gamma[i] + gamma[j])
            if lp > 50.0:
                lp = 50.0
            e = np.exp(lp - m)
            s += e
            slog += e * lp
            scost += e * C[i, j]
        em = np.exp(m)
        row_sum[i] = em * s
        row_ent[i] = em * s - em * slog
        row_cost[i] = em * scost
    return row_sum, row_ent, row_cost


@njit(**_JIT)
def sea_log_primal(C, gamma, lam):
    n = C.shape[0]
    logP = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(n):
            logP[i, j] = (lam[i] + lam[j] - 2.0 * C[i, j]) / (
                gamma[i] + gamma[j]
            )
    return logP
