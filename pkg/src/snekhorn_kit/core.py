"""Shared numerically robust primitives used by every solver.

The entropy convention throughout the package is
``H(p) = -sum_i p_i (log p_i - 1)``, i.e. Shannon entropy plus the total
mass of ``p``.  For a stochastic vector this is the Shannon entropy plus
one, and the perplexity is ``exp(H(p) - 1)``.  All solver targets are
expressed as ``log(perplexity) + 1`` accordingly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import backends


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class SolverError(RuntimeError):
    """Raised when an iterative solver fails to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class AffinityKind(str, enum.Enum):
    EA = "ea"
    EA_SYM = "ea-sym"
    RS = "rs"
    RS_SYM = "rs-sym"
    DS = "ds"
    SEA = "sea"
    ST = "st"


def _as_float_array(x, name="array"):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class ProbVector:
    """Nonnegative real vector, optionally flagged as stochastic.

    Stochastic vectors must sum to one within 1e-12 relative tolerance.
    """

    values: np.ndarray
    stochastic: bool = False

    def __post_init__(self):
        values = _as_float_array(self.values, "ProbVector")
        if values.ndim != 1:
            raise ValidationError("ProbVector must be one-dimensional")
        if np.any(values < 0):
            raise ValidationError("ProbVector entries must be nonnegative")
        if self.stochastic:
            total = values.sum()
            if not np.isclose(total, 1.0, rtol=1e-12, atol=1e-12):
                raise ValidationError(
                    f"stochastic ProbVector sums to {total!r}, expected 1"
                )
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class CostMatrix:
    """Dense symmetric nonnegative cost matrix with zero diagonal.

    Off-diagonal entries must be strictly positive: a zero off-diagonal
    cost (duplicate input rows) is rejected at construction since every
    solver in the package assumes it away.
    """

    entries: np.ndarray

    def __post_init__(self):
        entries = _as_float_array(self.entries, "CostMatrix")
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValidationError("CostMatrix must be square")
        if entries.shape[0] < 2:
            raise ValidationError("CostMatrix needs at least two points")
        if not np.array_equal(entries, entries.T):
            raise ValidationError("CostMatrix must be exactly symmetric")
        if np.any(entries < 0):
            raise ValidationError("CostMatrix entries must be nonnegative")
        if np.any(np.diag(entries) != 0):
            raise ValidationError("CostMatrix diagonal must be zero")
        off = entries + np.eye(entries.shape[0])
        zeros = np.argwhere(off == 0)
        if zeros.size:
            i, j = zeros[0]
            raise ValidationError(
                f"cost matrix not in D: off-diagonal zero at pair ({i}, {j})"
            )
        object.__setattr__(self, "entries", entries)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class Affinity:
    """Nonnegative affinity matrix plus provenance metadata."""

    entries: np.ndarray
    kind: AffinityKind
    params: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        entries = _as_float_array(self.entries, "Affinity")
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValidationError("Affinity must be square")
        if np.any(entries < 0):
            raise ValidationError("Affinity entries must be nonnegative")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "kind", AffinityKind(self.kind))

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def entropy(p) -> float:
    """Entropy ``-sum_i p_i (log p_i - 1)`` with the ``0 log 0 = 0`` rule.

    For a stochastic ``p`` this equals the Shannon entropy plus one.
    """
    if isinstance(p, ProbVector):
        values = p.values
    else:
        values = _as_float_array(p, "entropy input")
        if values.ndim != 1:
            raise ValidationError("entropy expects a vector")
        if np.any(values < 0):
            raise ValidationError("entropy input must be nonnegative")
    pos = values[values > 0]
    return float(pos.sum() - np.dot(pos, np.log(pos)))


def perplexity(p) -> float:
    """Effective neighbor count ``exp(H(p) - 1)`` of a stochastic vector."""
    if isinstance(p, ProbVector):
        if not p.stochastic:
            p = ProbVector(p.values, stochastic=True)
    else:
        p = ProbVector(p, stochastic=True)
    return float(np.exp(entropy(p) - 1.0))


def kl_divergence(P, Q) -> float:
    """Generalized KL ``sum_ij P_ij (log(P_ij / Q_ij) - 1)``.

    Supports nonnegative matrices of equal shape with the usual support
    condition ``Q_ij = 0 => P_ij = 0``.
    """
    P = _as_float_array(P, "KL first argument")
    Q = _as_float_array(Q, "KL second argument")
    if P.shape != Q.shape:
        raise ValidationError("KL arguments must have identical shapes")
    if np.any(P < 0) or np.any(Q < 0):
        raise ValidationError("KL arguments must be nonnegative")
    support = P > 0
    if np.any(support & (Q == 0)):
        raise ValidationError("KL support violation: P_ij > 0 where Q_ij = 0")
    Pp = P[support]
    Qp = Q[support]
    return float(np.dot(Pp, np.log(Pp / Qp)) - P.sum())


def log_sum_exp(v) -> float:
    """Max-shifted ``log(sum_k exp(v_k))``; never overflows for finite input."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValidationError("log_sum_exp of an empty vector")
    m = np.max(v)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(v - m))))


def row_entropies(P) -> np.ndarray:
    """Vector of row entropies ``H(P_i:)`` of a nonnegative matrix."""
    P = _as_float_array(P, "row_entropies input")
    if np.any(P < 0):
        raise ValidationError("row_entropies input must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(P > 0, np.log(np.where(P > 0, P, 1.0)), 0.0)
    return P.sum(axis=1) - np.einsum("ij,ij->i", P, logs)


def pairwise_sq_euclidean(X, jitter_seed=None) -> CostMatrix:
    """Squared Euclidean cost matrix of the rows of ``X``.

    Each pair is computed once from row differences so the result is
    exactly symmetric with exact zeros on the diagonal.  Duplicate rows
    produce an off-diagonal zero, which is an error (the cost must have
    ``C_ij = 0`` only on the diagonal).  Passing ``jitter_seed`` opts into
    a deterministic fallback that perturbs the data by
    ``1e-8 * median nonzero distance`` before recomputing.

    Parameters
    ----------
    X : array-like of shape (n, p)
        Data points, one per row; ``n >= 2``.
    jitter_seed : int, optional
        Seed for the duplicate-row jitter fallback.  Default is to raise.
    """
    X = _as_float_array(X, "data matrix")
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValidationError("pairwise_sq_euclidean needs an (n, p) matrix, n >= 2")
    D = backends.get().pairwise_sq_dists(np.ascontiguousarray(X))
    off = D + np.eye(D.shape[0])
    zeros = np.argwhere(off == 0)
    if zeros.size:
        i, j = zeros[0]
        if jitter_seed is None:
            raise ValidationError(
                f"cost matrix not in D: rows {i} and {j} are identical"
            )
        nonzero = D[D > 0]
        scale = 1e-8 * float(np.median(np.sqrt(nonzero))) if nonzero.size else 1e-8
        rng = np.random.default_rng(jitter_seed)
        X = X + scale * rng.standard_normal(X.shape)
        D = backends.get().pairwise_sq_dists(np.ascontiguousarray(X))
        off = D + np.eye(D.shape[0])
        if np.any(off == 0):
            raise ValidationError("jitter failed to separate duplicate rows")
    return CostMatrix(D)


def as_cost_matrix(C) -> CostMatrix:
    """Coerce an array or CostMatrix to a validated CostMatrix."""
    if isinstance(C, CostMatrix):
        return C
    return CostMatrix(np.asarray(C, dtype=np.float64))
