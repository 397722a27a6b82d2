"""Symmetric entropic affinities.

The affinity is the unique minimizer of ``<P, C>`` over symmetric
row-stochastic matrices whose every row entropy is at least
``log(xi) + 1``.  Two solvers are provided:

* dual ascent on the concave dual of the constrained program, whose
  gradients are the primal constraint violations and whose primal
  iterate has the closed form
  ``P(gamma, lam) = exp((lam (+) lam - 2C) / (gamma (+) gamma))``;
* Dykstra's alternating KL projections onto the row-entropy set and the
  symmetric matrices, applied to the Gibbs kernel ``exp(-C/sigma)``.

Both return the same matrix (the program has a unique solution); the
cross-method agreement is part of the test suite.
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
from .entropic import check_perplexity, ea_bandwidths, solve_ea

_GAMMA_FLOOR = 1e-12


@dataclass(frozen=True)
class SEASolution:
    """Converged symmetric entropic affinity with its dual variables."""

    P: Affinity
    gamma: np.ndarray
    lam: np.ndarray
    trace: dict
    method: str
    one_row_unsaturated: bool = False


@dataclass(frozen=True)
class KKTReport:
    """Constraint and stationarity residuals of a candidate solution."""

    stationarity_residual: float
    entropy_gap: float
    marginal_gap: float
    min_gamma: float
    n_entries_skipped: int
    tol: float

    @property
    def passed(self) -> bool:
        return (self.stationarity_residual <= self.tol
                and self.entropy_gap <= self.tol
                and self.marginal_gap <= self.tol)


def _check_gamma(gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=np.float64)
    if np.any(gamma <= 0):
        raise ValidationError("gamma entries must be strictly positive")
    return gamma


def sea_primal_from_duals(C, gamma, lam) -> np.ndarray:
    """Candidate primal ``exp((lam_i + lam_j - 2 C_ij)/(gamma_i + gamma_j))``."""
    C = as_cost_matrix(C)
    gamma = _check_gamma(gamma)
    lam = np.asarray(lam, dtype=np.float64)
    return np.exp(backends.get().sea_log_primal(C.entries, gamma, lam))


def sea_dual_gradients(C, gamma, lam, xi) -> tuple[np.ndarray, np.ndarray]:
    """Dual-ascent gradients: the primal constraint violations.

    Returns ``(target - H_r(P), 1 - P 1)`` with ``P = P(gamma, lam)``
    and ``target = log(xi) + 1``.
    """
    C = as_cost_matrix(C)
    gamma = _check_gamma(gamma)
    lam = np.asarray(lam, dtype=np.float64)
    row_sum, row_ent, _ = backends.get().sea_stats(C.entries, gamma, lam)
    target = np.log(float(xi)) + 1.0
    return target - row_ent, 1.0 - row_sum


def sea_dual_objective(C, gamma, lam, xi) -> float:
    """Lagrangian value at the closed-form primal for given duals."""
    C = as_cost_matrix(C)
    gamma = _check_gamma(gamma)
    lam = np.asarray(lam, dtype=np.float64)
    row_sum, row_ent, row_cost = backends.get().sea_stats(C.entries, gamma, lam)
    target = np.log(float(xi)) + 1.0
    return float(row_cost.sum()
                 + np.dot(gamma, target - row_ent)
                 + np.dot(lam, 1.0 - row_sum))


def _finish_solution(C, gamma, lam, xi, tol, trace, method,
                     one_row_unsaturated, extra_diag=None, P=None):
    if P is None:
        logP = backends.get().sea_log_primal(C.entries, gamma, lam)
        P = np.exp(logP)
    ent_gap = float(np.abs(row_entropies(P) - (np.log(xi) + 1.0)).max())
    marg_gap = float(np.abs(P.sum(axis=1) - 1.0).max())
    diagnostics = {
        "entropy_gap": ent_gap,
        "marginal_gap": marg_gap,
        "iters": len(trace["entropy_gap"]),
        "method": method,
    }
    if extra_diag:
        diagnostics.update(extra_diag)
    affinity = Affinity(
        P,
        AffinityKind.SEA,
        params={"perplexity": float(xi), "tol": tol, "method": method},
        diagnostics=diagnostics,
    )
    return SEASolution(P=affinity, gamma=gamma, lam=lam,
                       trace={k: np.asarray(v) for k, v in trace.items()},
                       method=method,
                       one_row_unsaturated=one_row_unsaturated)


def _convergence_state(gamma, grad_gamma, grad_lam, tol, floor):
    """Feasibility check honoring complementary slackness at the floor.

    A row counts as resolved when its entropy is saturated within tol,
    or when its entropy exceeds the target while its dual sits at the
    positivity floor (the at-most-one admissible unsaturated row).
    Returns ``(converged, one_row_unsaturated)``.
    """
    if np.abs(grad_lam).max() > tol:
        return False, False
    saturated = np.abs(grad_gamma) <= tol
    unsat = ~saturated & (grad_gamma < 0) & (gamma <= 10.0 * floor)
    n_unsat = int(unsat.sum())
    if np.all(saturated | unsat) and n_unsat <= 1:
        return True, n_unsat == 1
    return False, False


def solve_sea_dual_ascent(C, xi, tol: float = 1e-6, max_iter: int = 10000,
                          lr: float = 1e-1, optimizer: str = "adam",
                          betas: tuple[float, float] = (0.9, 0.999)
                          ) -> SEASolution:
    """Dual ascent on the entropy/marginal multipliers of the SEA program.

    Optimizes ``beta`` with ``gamma = beta**2`` (keeps the entropy duals
    positive without clipping) and ``lam`` by adaptive-moment ascent;
    gradients are the constraint gaps, so the stopping rule is primal
    feasibility: ``max(entropy gap, marginal gap) <= tol``.  The single
    admissible corner case — one row whose entropy stays above the
    target with a vanishing dual — is accepted and flagged.

    The adaptive ascent can cycle when an entropy dual approaches zero
    (the dual curvature blows up there); on stall the solve switches to
    a bound-constrained quasi-Newton pass on the same objective, which
    pins such duals at a small positive floor.  ``optimizer="lbfgs"``
    runs that pass directly.

    Parameters
    ----------
    C : CostMatrix or array
    xi : float
        Target perplexity, ``1 <= xi <= n - 1``.
    tol : float, optional
        Feasibility tolerance on both constraint gaps.
    max_iter : int, optional
    lr : float, optional
        Ascent step size.
    optimizer : {"adam", "lbfgs"}, optional
    """
    C = as_cost_matrix(C)
    xi = check_perplexity(xi, C.n)
    target = np.log(xi) + 1.0
    kernels = backends.get()

    gamma0 = solve_ea(C, xi).epsilon
    floor = max(1e-9 * float(np.median(gamma0)), _GAMMA_FLOOR)
    if optimizer == "lbfgs":
        return _solve_sea_lbfgs(C, xi, gamma0, np.zeros(C.n), tol, max_iter,
                                floor, None)
    if optimizer != "adam":
        raise ValidationError(f"unknown optimizer {optimizer!r}")

    n = C.n
    beta = np.sqrt(gamma0)
    lam = np.zeros(n)
    b1, b2 = betas
    m_b = np.zeros(n)
    v_b = np.zeros(n)
    m_l = np.zeros(n)
    v_l = np.zeros(n)
    trace = {"dual_objective": [], "entropy_gap": [], "marginal_gap": []}
    best = {"gap": np.inf, "gamma": gamma0, "lam": lam}
    stall_window = 1000

    for k in range(1, max_iter + 1):
        gamma = np.maximum(beta * beta, _GAMMA_FLOOR)
        row_sum, row_ent, row_cost = kernels.sea_stats(C.entries, gamma, lam)
        grad_gamma = target - row_ent
        grad_lam = 1.0 - row_sum
        e_gap = float(np.abs(grad_gamma).max())
        m_gap = float(np.abs(grad_lam).max())
        trace["dual_objective"].append(
            float(row_cost.sum() + np.dot(gamma, grad_gamma)
                  + np.dot(lam, grad_lam)))
        trace["entropy_gap"].append(e_gap)
        trace["marginal_gap"].append(m_gap)

        converged, flagged = _convergence_state(gamma, grad_gamma, grad_lam,
                                                tol, floor)
        if converged:
            return _finish_solution(C, gamma, lam, xi, tol, trace,
                                    "dual-ascent", flagged)
        gap = max(e_gap, m_gap)
        if gap < best["gap"]:
            best = {"gap": gap, "gamma": gamma.copy(), "lam": lam.copy(),
                    "iter": k}
        elif k - best.get("iter", 0) >= stall_window:
            break

        g_b = 2.0 * beta * grad_gamma
        m_b = b1 * m_b + (1 - b1) * g_b
        v_b = b2 * v_b + (1 - b2) * g_b * g_b
        m_l = b1 * m_l + (1 - b1) * grad_lam
        v_l = b2 * v_l + (1 - b2) * grad_lam * grad_lam
        c1 = 1 - b1 ** k
        c2 = 1 - b2 ** k
        beta = beta + lr * (m_b / c1) / (np.sqrt(v_b / c2) + 1e-8)
        lam = lam + lr * (m_l / c1) / (np.sqrt(v_l / c2) + 1e-8)

    # stalled or out of iterations: quasi-Newton pass from the best iterate
    return _solve_sea_lbfgs(C, xi, np.maximum(best["gamma"], floor),
                            best["lam"], tol, max_iter, floor, trace)


def _solve_sea_lbfgs(C, xi, gamma0, lam0, tol, max_iter, floor, trace):
    """Bound-constrained quasi-Newton pass on the dual.

    Works in coordinates ``(gamma, a)`` with ``lam = gamma * a`` so that
    the admissible corner (one entropy dual pinned at the floor with its
    marginal multiplier vanishing alongside) stays well conditioned.  At
    such a corner the dual is flat in ``a``; the diagonal entry of the
    pinned row is then fixed by its marginal constraint instead, which
    is exactly the structure the stationarity system prescribes there.
    """
    from scipy.optimize import minimize

    kernels = backends.get()
    n = C.n
    target = np.log(xi) + 1.0
    if trace is None:
        trace = {"dual_objective": [], "entropy_gap": [], "marginal_gap": []}

    def neg_dual(x):
        gamma, a = x[:n], x[n:]
        lam = gamma * a
        row_sum, row_ent, row_cost = kernels.sea_stats(C.entries, gamma, lam)
        grad_gamma = target - row_ent
        grad_lam = 1.0 - row_sum
        value = (row_cost.sum() + np.dot(gamma, grad_gamma)
                 + np.dot(lam, grad_lam))
        trace["dual_objective"].append(float(value))
        trace["entropy_gap"].append(float(np.abs(grad_gamma).max()))
        trace["marginal_gap"].append(float(np.abs(grad_lam).max()))
        grad = np.concatenate([grad_gamma + a * grad_lam, gamma * grad_lam])
        return -value, -grad

    bounds = [(floor, None)] * n + [(None, None)] * n
    x = np.concatenate([gamma0, lam0 / np.maximum(gamma0, floor)])
    last = None
    for _ in range(8):
        res = minimize(neg_dual, x, jac=True, method="L-BFGS-B",
                       bounds=bounds,
                       options={"maxiter": max_iter, "ftol": 0.0,
                                "gtol": 0.01 * tol, "maxfun": 50 * max_iter})
        x = res.x
        gamma, a = x[:n], x[n:]
        pinned = np.flatnonzero(gamma <= 10.0 * floor)
        if pinned.size == 1:
            # dual flat in a there; enforce the row marginal directly
            ell = pinned[0]
            logP = kernels.sea_log_primal(C.entries, gamma, gamma * a)
            off = np.exp(logP[ell])
            residual_mass = 1.0 - (off.sum() - off[ell])
            if residual_mass > 0:
                x[n + ell] = np.log(residual_mass)
                gamma, a = x[:n], x[n:]
        lam = gamma * a
        row_sum, row_ent, _ = kernels.sea_stats(C.entries, gamma, lam)
        grad_gamma = target - row_ent
        grad_lam = 1.0 - row_sum
        converged, flagged = _convergence_state(gamma, grad_gamma, grad_lam,
                                                tol, floor)
        if converged:
            return _finish_solution(C, gamma, lam, xi, tol, trace,
                                    "dual-ascent", flagged,
                                    extra_diag={"optimizer": "lbfgs"})
        # the (gamma, a) chart is singular at gamma = 0 and can create
        # spurious boundary stationary points where the entropy
        # constraint is violated; push those rows back to the interior
        spurious = (gamma <= 10.0 * floor) & (grad_gamma > tol)
        if spurious.any():
            x[:n][spurious] = float(np.median(gamma))
            x[n:][spurious] = 0.0
        gaps = (float(np.abs(grad_gamma).max()), float(np.abs(grad_lam).max()))
        if gaps == last:
            break
        last = gaps
    unsat_pinned = int(((gamma <= 10.0 * floor) & (grad_gamma < -tol)).sum())
    if unsat_pinned >= 2:
        raise SolverError(
            "the optimum appears to lie on the boundary of the positive "
            "orthant with several unsaturated rows; the closed-form dual "
            "parameterization cannot represent it "
            f"(entropy gap {last[0]:.3e}, marginal gap {last[1]:.3e})",
            diagnostics={"entropy_gap": last[0], "marginal_gap": last[1],
                         "pinned_rows": unsat_pinned},
        )
    raise SolverError(
        f"dual solve did not reach feasibility {tol} "
        f"(entropy gap {last[0]:.3e}, marginal gap {last[1]:.3e})",
        diagnostics={"entropy_gap": last[0], "marginal_gap": last[1],
                     **{k: np.asarray(v) for k, v in trace.items()}},
    )


def kl_project_symmetric(K) -> np.ndarray:
    """KL projection onto symmetric matrices: entrywise ``sqrt(K * K^T)``."""
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValidationError("kl_project_symmetric expects a square matrix")
    if np.any(K <= 0):
        raise ValidationError("kl_project_symmetric requires positive entries")
    return np.sqrt(K * K.T)


def kl_project_hxi(K, xi, tol: float = 1e-9, max_iter: int = 200) -> np.ndarray:
    """KL projection onto row-stochastic matrices with entropy >= log(xi)+1.

    Row i of the result is ``softmax(log(K_i:) / rho_i)`` with
    ``rho_i = max(eps_i, 1)`` where ``eps_i`` is the entropic-affinity
    bandwidth for the cost ``-log K``.  Rows whose plain normalization
    already satisfies the entropy bound keep ``rho_i = 1`` (no root
    finding needed there).
    """
    K = np.asarray(K, dtype=np.float64)
    if np.any(K <= 0):
        raise ValidationError("kl_project_hxi requires positive entries")
    logK = np.log(K)
    return np.exp(_kl_project_hxi_log(logK, float(xi), tol, max_iter))


def _kl_project_hxi_log(logK, xi, tol, max_iter):
    n_rows, n = logK.shape
    xi = check_perplexity(xi, n)
    target = np.log(xi) + 1.0
    rho = np.ones(n_rows)
    z = logK - logK.max(axis=1, keepdims=True)
    E = np.exp(z)
    s = E.sum(axis=1)
    ent0 = np.log(s) - (E * z).sum(axis=1) / s + 1.0
    need = ent0 < target
    if np.any(need):
        eps, _ = ea_bandwidths(-logK[need], target, tol, max_iter)
        rho[need] = np.maximum(eps, 1.0)
    logP = logK / rho[:, None]
    shift = logP.max(axis=1, keepdims=True)
    logP = logP - shift - np.log(
        np.exp(logP - shift).sum(axis=1, keepdims=True))
    return logP


def _recover_duals(C, logP):
    """Least-squares dual estimates from the stationarity identity.

    At the optimum ``gamma_i (log P_ij - log P_ii) +
    gamma_j (log P_ij - log P_jj) = -2 C_ij`` and
    ``lam_i = gamma_i log P_ii``.  Deeply underflowed entries carry no
    information and are left out of the normal equations.
    """
    d = np.diag(logP)
    G = logP - d[:, None]
    W = (logP > -500.0).astype(np.float64)
    np.fill_diagonal(W, 0.0)
    Gw = G * W
    M = Gw * Gw.T
    np.fill_diagonal(M, (Gw * G).sum(axis=1))
    b = -2.0 * (Gw * C).sum(axis=1)
    gamma, *_ = np.linalg.lstsq(M, b, rcond=None)
    gamma = np.maximum(gamma, _GAMMA_FLOOR)
    return gamma, gamma * d


def solve_sea_dykstra(C, xi, sigma: float | None = None, tol: float = 1e-7,
                      max_iter: int = 20000, feas_tol: float = 1e-5,
                      max_retries: int = 6) -> SEASolution:
    """Alternating KL projections (Dykstra) for the SEA program.

    Starting from the Gibbs kernel ``exp(-C/sigma)`` the loop projects
    onto the row-entropy set, applies the Dykstra correction, and
    projects onto the symmetric matrices, all in log domain.  If the
    converged iterate leaves some row entropies unsaturated, sigma was
    too large and the solve retries with ``sigma / 2``.

    Parameters
    ----------
    C : CostMatrix or array
    xi : float
    sigma : float, optional
        Gibbs scaling; defaults to the smallest entropic-affinity bandwidth.
    tol : float, optional
        Stop when consecutive iterates differ by less (infinity norm).
    feas_tol : float, optional
        Post-hoc bound on the entropy and marginal gaps.
    """
    C = as_cost_matrix(C)
    xi = check_perplexity(xi, C.n)
    target = np.log(xi) + 1.0
    if sigma is None:
        sigma = float(solve_ea(C, xi).epsilon.min())
    elif sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")

    last_gaps = None
    for attempt in range(max_retries + 1):
        result = _dykstra_once(C, xi, sigma, tol, max_iter, target)
        if result is not None:
            logPs, trace, ent_gap, marg_gap = result
            if ent_gap <= feas_tol and marg_gap <= feas_tol:
                gamma, lam = _recover_duals(C.entries, logPs)
                return _finish_solution(
                    C, gamma, lam, xi, feas_tol, trace, "dykstra", False,
                    extra_diag={"sigma": sigma, "retries": attempt},
                    P=np.exp(logPs))
            last_gaps = (ent_gap, marg_gap)
        sigma = 0.5 * sigma
    raise SolverError(
        f"Dykstra left constraints unsatisfied after {max_retries} sigma "
        f"halvings (last gaps {last_gaps}); use the dual-ascent method",
        diagnostics={"sigma": sigma, "gaps": last_gaps},
    )


def _dykstra_once(C, xi, sigma, tol, max_iter, target):
    logPs = -C.entries / sigma
    logXi = np.zeros_like(logPs)
    Ps = np.exp(logPs)
    trace = {"dual_objective": [], "entropy_gap": [], "marginal_gap": []}
    for _ in range(max_iter):
        logPh = _kl_project_hxi_log(logPs + logXi, xi, 1e-9, 200)
        logXi = logXi + logPs - logPh
        logPs = 0.5 * (logPh + logPh.T)
        Ps_new = np.exp(logPs)
        change = float(np.abs(Ps_new - Ps).max())
        Ps = Ps_new
        ent_gap = float(np.abs(row_entropies(Ps) - target).max())
        marg_gap = float(np.abs(Ps.sum(axis=1) - 1.0).max())
        trace["dual_objective"].append(np.nan)
        trace["entropy_gap"].append(ent_gap)
        trace["marginal_gap"].append(marg_gap)
        if change < tol:
            return logPs, trace, ent_gap, marg_gap
    return None


def verify_kkt_sea(C, sol: SEASolution, tol: float = 1e-5) -> KKTReport:
    """Stationarity and feasibility report for a candidate SEA solution.

    The stationarity residual is
    ``max_ij |2 C_ij + (gamma_i + gamma_j) log P_ij - (lam_i + lam_j)|``
    over entries of P large enough for their log to be meaningful.
    """
    C = as_cost_matrix(C)
    gamma = _check_gamma(sol.gamma)
    P = sol.P.entries
    xi = float(sol.P.params["perplexity"])
    target = np.log(xi) + 1.0
    keep = P > 1e-280
    logP = np.log(np.where(keep, P, 1.0))
    R = (2.0 * C.entries + (gamma[:, None] + gamma[None, :]) * logP
         - (sol.lam[:, None] + sol.lam[None, :]))
    stationarity = float(np.abs(R[keep]).max())
    ent_gap = float(np.abs(row_entropies(P) - target).max())
    marg_gap = float(np.abs(P.sum(axis=1) - 1.0).max())
    return KKTReport(
        stationarity_residual=stationarity,
        entropy_gap=ent_gap,
        marginal_gap=marg_gap,
        min_gamma=float(gamma.min()),
        n_entries_skipped=int((~keep).sum()),
        tol=tol,
    )
