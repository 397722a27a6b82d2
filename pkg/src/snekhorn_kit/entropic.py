"""Classical entropic affinities and their row-stochastic relatives.

Solves the per-row bandwidth problem: find eps_i > 0 such that the i-th
row of ``softmax(-C_i: / eps_i)`` has entropy ``log(perplexity) + 1``,
exposes the l2 symmetrization used by symmetric-SNE, and the plain
row-stochastic Gaussian baseline with a shared scalar bandwidth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backends
from .core import (
    Affinity,
    AffinityKind,
    CostMatrix,
    SolverError,
    ValidationError,
    as_cost_matrix,
    row_entropies,
)

_EA_FLAG_MESSAGES = {
    1: "root bracket could not be established after 200 geometric expansions",
    2: "entropy root finder did not reach tolerance within max_iter",
    3: "cost row is constant",
}


@dataclass(frozen=True)
class EASolution:
    """Row-stochastic entropic affinity with its per-row dual bandwidths."""

    P: Affinity
    epsilon: np.ndarray
    residuals: np.ndarray


def check_perplexity(xi: float, n: int) -> float:
    xi = float(xi)
    if not 1.0 <= xi <= n - 1:
        raise ValidationError(
            f"perplexity out of range: need 1 <= xi <= n-1 = {n - 1}, got {xi}"
        )
    return xi


def ea_bandwidths(cost_rows: np.ndarray, target: float, tol: float,
                  max_iter: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-row root finding on general real cost rows.

    Returns ``(eps, gaps)``; raises SolverError naming the first failing
    row.  Rows are treated independently (shift-invariant softmax), so
    callers may pass arbitrary finite rows, not only members of D.
    """
    eps, gaps, flags = backends.get().ea_bisect(
        np.ascontiguousarray(cost_rows, dtype=np.float64),
        float(target), float(tol), int(max_iter),
    )
    if np.any(flags):
        i = int(np.argmax(flags > 0))
        raise SolverError(
            f"entropic affinity failed on row {i}: "
            f"{_EA_FLAG_MESSAGES[int(flags[i])]}",
            diagnostics={"row": i, "flag": int(flags[i]), "gap": float(gaps[i])},
        )
    return eps, gaps


def _row_softmax(rows: np.ndarray, eps: np.ndarray) -> np.ndarray:
    z = -rows / eps[:, None]
    z -= z.max(axis=1, keepdims=True)
    P = np.exp(z)
    P /= P.sum(axis=1, keepdims=True)
    return P


def solve_ea(C, xi: float, tol: float = 1e-9, max_iter: int = 200,
             exclude_self: bool = False) -> EASolution:
    """Entropic affinity: per-row Gaussian bandwidths with fixed perplexity.

    Each row i of the result is ``softmax(-C_i: / eps_i)`` where ``eps_i``
    solves ``H(P_i:) = log(xi) + 1`` by bracketed bisection on
    ``log(eps)``.  The softmax runs over all columns including the
    diagonal; ``exclude_self=True`` removes the diagonal term
    (``P_ii = 0``), reproducing classical t-SNE input affinities, and is
    flagged as such in the params.

    Parameters
    ----------
    C : CostMatrix or array
        Symmetric cost with zero diagonal and positive off-diagonal.
    xi : float
        Target perplexity, ``1 <= xi <= n - 1``.
    tol : float, optional
        Tolerance on the per-row entropy gap.
    max_iter : int, optional
        Bisection iterations per row.
    """
    C = as_cost_matrix(C)
    n = C.n
    xi = check_perplexity(xi, n)
    target = np.log(xi) + 1.0

    if exclude_self:
        mask = ~np.eye(n, dtype=bool)
        rows = C.entries[mask].reshape(n, n - 1)
    else:
        rows = C.entries
    eps, _ = ea_bandwidths(rows, target, tol, max_iter)
    P_rows = _row_softmax(rows, eps)
    if exclude_self:
        P = np.zeros((n, n))
        P[mask] = P_rows.ravel()
    else:
        P = P_rows
    residuals = np.abs(row_entropies(P) - target)
    if residuals.max() > tol:
        raise SolverError(
            "entropic affinity residual above tolerance after root finding",
            diagnostics={"max_residual": float(residuals.max())},
        )
    affinity = Affinity(
        P,
        AffinityKind.EA,
        params={"perplexity": xi, "tol": tol, "exclude_self": exclude_self},
        diagnostics={
            "max_residual": float(residuals.max()),
            "max_iter": max_iter,
        },
    )
    return EASolution(P=affinity, epsilon=eps, residuals=residuals)


def symmetrize_l2(P):
    """Euclidean projection onto symmetric matrices: ``(P + P^T) / 2``."""
    if isinstance(P, Affinity):
        sym = 0.5 * (P.entries + P.entries.T)
        kind = {
            AffinityKind.EA: AffinityKind.EA_SYM,
            AffinityKind.RS: AffinityKind.RS_SYM,
        }.get(P.kind, P.kind)
        return Affinity(sym, kind, params=dict(P.params),
                        diagnostics=dict(P.diagnostics))
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValidationError("symmetrize_l2 expects a square matrix")
    return 0.5 * (P + P.T)


def row_stochastic_gaussian(C, nu: float) -> Affinity:
    """Row-normalized Gaussian kernel ``exp(-C/nu)`` with scalar bandwidth."""
    C = as_cost_matrix(C)
    if nu <= 0:
        raise ValidationError(f"bandwidth must be positive, got {nu}")
    P = _row_softmax(C.entries, np.full(C.n, float(nu)))
    return Affinity(P, AffinityKind.RS, params={"bandwidth": float(nu)})


def calibrate_rs_nu(C, xi_target: float, tol: float = 1e-6,
                    max_iter: int = 200) -> tuple[float, Affinity]:
    """Scalar bandwidth whose row-stochastic Gaussian has mean perplexity xi.

    Bisection on log(nu); the mean row entropy is increasing in nu.
    """
    C = as_cost_matrix(C)
    xi_target = check_perplexity(xi_target, C.n)
    target = np.log(xi_target) + 1.0

    def gap(nu: float) -> float:
        P = _row_softmax(C.entries, np.full(C.n, nu))
        return float(row_entropies(P).mean()) - target

    off = C.entries[~np.eye(C.n, dtype=bool)]
    lo = hi = float(np.median(off))
    for _ in range(200):
        if gap(lo) < 0:
            break
        lo /= 10.0
    else:
        raise SolverError("bandwidth calibration: lower bracket expansion failed")
    for _ in range(200):
        if gap(hi) > 0:
            break
        hi *= 10.0
    else:
        raise SolverError("bandwidth calibration: upper bracket expansion failed")
    nu = float(np.sqrt(lo * hi))
    for _ in range(max_iter):
        nu = float(np.sqrt(lo * hi))
        g = gap(nu)
        if abs(g) < tol:
            break
        if g < 0:
            lo = nu
        else:
            hi = nu
    else:
        raise SolverError("bandwidth calibration did not converge")
    affinity = row_stochastic_gaussian(C, nu)
    return nu, affinity
