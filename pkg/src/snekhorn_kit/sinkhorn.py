"""Symmetric entropic optimal transport via the Sinkhorn fixed point.

Computes the doubly stochastic affinity ``P = exp((f (+) f - C) / nu)``
from the averaged fixed-point iteration on the dual potential f, and
calibrates the bandwidth nu so the average row perplexity hits a target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backends
from .core import (
    Affinity,
    AffinityKind,
    SolverError,
    ValidationError,
    as_cost_matrix,
    row_entropies,
)


@dataclass(frozen=True)
class SinkhornSolution:
    """Converged symmetric plan with its dual potential and diagnostics."""

    P: Affinity
    f: np.ndarray
    nu: float
    iters: int
    residual: float
    residual_trace: np.ndarray


def solve_sinkhorn_symmetric(C, nu: float = 1.0, tol: float = 1e-6,
                             max_iter: int = 10000,
                             f_init: np.ndarray | None = None
                             ) -> SinkhornSolution:
    """Doubly stochastic projection of ``exp(-C/nu)`` under KL.

    Iterates the averaged update
    ``f_i <- (f_i - nu * LSE_j((f_j - C_ij)/nu)) / 2`` until the marginal
    residual ``max_i |sum_j P_ij - 1|`` drops to ``tol``.  The plan built
    from a symmetric cost is exactly symmetric, so row and column
    residuals coincide.

    Parameters
    ----------
    C : CostMatrix or array
        Symmetric cost with zero diagonal.
    nu : float, optional
        Bandwidth of the Gibbs kernel (default 1).
    tol : float, optional
        Tolerance on the marginal residual (infinity norm).
    max_iter : int, optional
        Maximum number of potential updates.
    f_init : array, optional
        Warm-start potential; defaults to zero.
    """
    C = as_cost_matrix(C)
    if nu <= 0:
        raise ValidationError(f"bandwidth must be positive, got {nu}")
    if tol <= 0:
        raise ValidationError(f"tolerance must be positive, got {tol}")
    if f_init is None:
        f0 = np.zeros(C.n)
    else:
        f0 = np.asarray(f_init, dtype=np.float64)
        if f0.shape != (C.n,):
            raise ValidationError("f_init has wrong shape")
    f, trace, iters, converged = backends.get().sinkhorn_symmetric(
        C.entries, float(nu), f0, float(tol), int(max_iter)
    )
    if not converged:
        raise SolverError(
            f"Sinkhorn did not reach residual {tol} in {max_iter} iterations "
            f"(final residual {trace[-1]:.3e})",
            diagnostics={"residual_trace": trace, "nu": nu},
        )
    P = np.exp((f[:, None] + f[None, :] - C.entries) / nu)
    affinity = Affinity(
        P,
        AffinityKind.DS,
        params={"bandwidth": float(nu), "tol": tol},
        diagnostics={"iters": iters, "residual": float(trace[-1])},
    )
    return SinkhornSolution(P=affinity, f=f, nu=float(nu), iters=iters,
                            residual=float(trace[-1]), residual_trace=trace)


def global_entropy(P) -> float:
    """Sum of row entropies ``sum_i H(P_i:)`` of a nonnegative matrix."""
    if isinstance(P, Affinity):
        P = P.entries
    return float(row_entropies(P).sum())


def calibrate_nu(C, xi_target: float, tol: float = 1e-6,
                 sinkhorn_tol: float = 1e-8, max_iter: int = 200
                 ) -> tuple[float, SinkhornSolution]:
    """Bandwidth whose symmetric plan has mean row entropy log(xi)+1.

    Bracketed bisection on ``log(nu)``; the mean row entropy of the
    converged plan increases with nu.  Consecutive Sinkhorn solves are
    warm-started from the previous potential.

    Parameters
    ----------
    C : CostMatrix or array
    xi_target : float
        Target average perplexity, ``1 < xi_target < n``.
    tol : float, optional
        Tolerance on the mean entropy gap.
    sinkhorn_tol : float, optional
        Marginal tolerance of the inner solves.
    """
    C = as_cost_matrix(C)
    n = C.n
    xi_target = float(xi_target)
    if not 1.0 < xi_target < n:
        raise ValidationError(
            f"target perplexity out of range: need 1 < xi < n = {n}"
        )
    target = np.log(xi_target) + 1.0
    state = {"f": None}

    def gap(nu: float) -> float:
        sol = solve_sinkhorn_symmetric(C, nu, sinkhorn_tol,
                                       f_init=state["f"])
        state["f"] = sol.f
        state["sol"] = sol
        return float(row_entropies(sol.P.entries).mean()) - target

    off = C.entries[~np.eye(n, dtype=bool)]
    lo = hi = float(np.median(off))
    for _ in range(200):
        if gap(lo) < 0:
            break
        lo /= 10.0
    else:
        raise SolverError("nu calibration: lower bracket expansion failed")
    for _ in range(200):
        if gap(hi) > 0:
            break
        hi *= 10.0
    else:
        raise SolverError("nu calibration: upper bracket expansion failed")
    for _ in range(max_iter):
        nu = float(np.sqrt(lo * hi))
        g = gap(nu)
        if abs(g) < tol:
            return nu, state["sol"]
        if g < 0:
            lo = nu
        else:
            hi = nu
    raise SolverError("nu calibration did not converge",
                      diagnostics={"bracket": (lo, hi)})
