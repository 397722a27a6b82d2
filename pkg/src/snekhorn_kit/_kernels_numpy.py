"""Pure-numpy implementations of the hot numeric kernels.

This module is the reference backend; `_kernels_numba` mirrors every
function here with an njit-compiled twin.  Keep signatures and semantics
in lockstep — the parity tests compare the two entrywise.
"""

import numpy as np

NAME = "numpy"

# row-block size budget (elements) for chunked pairwise distances
_BLOCK_BUDGET = 2 ** 24


def pairwise_sq_dists(X):
    """Exact-symmetric squared Euclidean distances between rows of X.

    Built from row differences (never the dot-product expansion), so
    D[i, j] and D[j, i] are bitwise equal and the diagonal is exactly 0.
    """
    n, p = X.shape
    D = np.empty((n, n), dtype=np.float64)
    block = max(1, int(_BLOCK_BUDGET // max(1, n * p)))
    for start in range(0, n, block):
        stop = min(n, start + block)
        diff = X[start:stop, None, :] - X[None, :, :]
        D[start:stop] = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(D, 0.0)
    return D


def _softmax_entropy(rows, eps):
    """Entropy of softmax(-rows / eps) per row; rows (m, n), eps (m,)."""
    z = -rows / eps[:, None]
    m = z.max(axis=1)
    E = np.exp(z - m[:, None])
    s = E.sum(axis=1)
    lse = m + np.log(s)
    mean_z = (E * z).sum(axis=1) / s
    return lse - mean_z + 1.0


def ea_bisect(C, target, tol, max_iter):
    """Per-row bandwidths eps with H(softmax(-C_i:/eps_i)) = target.

    Bisection on log(eps) after bracket expansion.  Returns
    ``(eps, gap, flags)`` with flags 0 = converged, 1 = bracket failure,
    2 = max_iter exhausted, 3 = constant row.  Rows are shift-invariant,
    so arbitrary real cost rows are accepted.
    """
    C = np.asarray(C, dtype=np.float64)
    n = C.shape[0]
    rows = C - C.min(axis=1, keepdims=True)
    scale = rows.max(axis=1)
    eps = np.ones(n)
    gap = np.full(n, np.inf)
    flags = np.zeros(n, dtype=np.int8)
    flags[scale == 0.0] = 3
    ok = flags == 0
    if not np.any(ok):
        return eps, gap, flags

    lo = np.where(ok, 1e-12 * scale, 1.0)
    hi = np.where(ok, 1e4 * scale, 1.0)
    for bound, sign, factor in ((lo, 1.0, 0.1), (hi, -1.0, 10.0)):
        idx = np.flatnonzero(ok)
        for _ in range(200):
            g = sign * (_softmax_entropy(rows[idx], bound[idx]) - target)
            idx = idx[g > 0]
            if idx.size == 0:
                break
            bound[idx] *= factor
        if idx.size:
            flags[idx] = 1
            ok[idx] = False

    done = ~ok
    for _ in range(max_iter):
        if np.all(done):
            break
        mid = np.sqrt(lo * hi)
        g = np.empty(n)
        g[~done] = _softmax_entropy(rows[~done], mid[~done]) - target
        newly = ~done & (np.abs(g) < tol)
        eps[~done] = mid[~done]
        gap[~done] = np.abs(g[~done])
        done |= newly
        low_side = ~done & (g < 0)
        lo[low_side] = mid[low_side]
        hi[~done & ~low_side] = mid[~done & ~low_side]
    flags[ok & (gap >= tol)] = 2
    return eps, gap, flags


def sinkhorn_symmetric(C, nu, f0, tol, max_iter):
    """Averaged symmetric Sinkhorn fixed point on the dual potential f.

    Iterates ``f <- (f - g) / 2`` with ``g_i = nu * LSE_j((f_j - C_ij)/nu)``
    until ``max_i |sum_j exp((f_i + f_j - C_ij)/nu) - 1| <= tol``.
    Returns ``(f, residual_trace, n_updates, converged)``; the residual
    trace includes the final accepted residual.
    """
    f = f0.astype(np.float64).copy()
    trace = np.empty(max_iter + 1, dtype=np.float64)
    converged = False
    iters = 0
    for k in range(max_iter + 1):
        A = (f[None, :] - C) / nu
        m = A.max(axis=1)
        lse = m + np.log(np.exp(A - m[:, None]).sum(axis=1))
        g = nu * lse
        res = np.max(np.abs(np.exp((f + g) / nu) - 1.0))
        trace[k] = res
        iters = k
        if res <= tol:
            converged = True
            break
        if k == max_iter:
            break
        f = 0.5 * (f - g)
    return f, trace[: iters + 1].copy(), iters, converged


def sea_stats(C, gamma, lam):
    """Row sums, row entropies and row transport costs of P(gamma, lam).

    ``log P_ij = (lam_i + lam_j - 2 C_ij) / (gamma_i + gamma_j)``,
    evaluated with per-row max shifts.  Entries are capped at e^50 so a
    wandering dual iterate yields huge but finite statistics instead of
    overflow.
    """
    logP = np.minimum(sea_log_primal(C, gamma, lam), 50.0)
    m = logP.max(axis=1)
    E = np.exp(logP - m[:, None])
    s = E.sum(axis=1)
    em = np.exp(m)
    row_sum = em * s
    row_ent = row_sum - em * (E * logP).sum(axis=1)
    row_cost = em * (E * C).sum(axis=1)
    return row_sum, row_ent, row_cost


def sea_log_primal(C, gamma, lam):
    """log P(gamma, lam) = (lam (+) lam - 2C) / (gamma (+) gamma)."""
    num = lam[:, None] + lam[None, :] - 2.0 * C
    den = gamma[:, None] + gamma[None, :]
    return num / den
