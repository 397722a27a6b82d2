"""Evaluation metrics, spectral clustering and PCA preprocessing.

The scalar scores (adjusted Rand index, silhouette, trustworthiness) are
delegated to scikit-learn behind the documented conventions — singleton
clusters score 0 in the silhouette, distance ties break by index in the
trustworthiness, degenerate labelings give ARI 0 — and are cross-checked
against brute-force oracles in the test suite.  Spectral clustering is
assembled explicitly (unnormalized Laplacian, dense eigendecomposition,
seeded k-means++ with 10 restarts) so runs are reproducible bit for bit.
"""

from __future__ import annotations

import numpy as np
from sklearn.cluster import KMeans
from sklearn.manifold import trustworthiness as _sk_trustworthiness
from sklearn.metrics import adjusted_rand_score as _sk_ari
from sklearn.metrics import silhouette_score as _sk_silhouette

from .core import Affinity, ValidationError


def _entries(P):
    if isinstance(P, Affinity):
        P = P.entries
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValidationError("affinity must be a square matrix")
    if np.any(P < 0):
        raise ValidationError("affinity must be nonnegative")
    if not np.allclose(P, P.T, rtol=0.0, atol=1e-12):
        raise ValidationError("affinity must be symmetric")
    return P


def pca_reduce(X, d: int) -> np.ndarray:
    """Project centered data onto its top-d principal directions.

    Principal directions are sign-fixed so that their largest-magnitude
    coordinate is positive, making the projection deterministic.
    """
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if not 1 <= d <= min(n, p):
        raise ValidationError(f"d must be in [1, min(n, p)] = [1, {min(n, p)}]")
    Xc = X - X.mean(axis=0)
    _, _, Vt = np.linalg.svd(Xc, full_matrices=False)
    V = Vt[:d]
    for row in V:
        idx = np.argmax(np.abs(row))
        if row[idx] < 0:
            row *= -1.0
    return Xc @ V.T


def laplacian(P) -> np.ndarray:
    """Unnormalized graph Laplacian ``diag(P 1) - P``."""
    P = _entries(P)
    return np.diag(P.sum(axis=1)) - P


def laplacian_spectrum(P, k: int) -> np.ndarray:
    """The k smallest Laplacian eigenvalues in nondecreasing order."""
    L = laplacian(P)
    if not 1 <= k <= L.shape[0]:
        raise ValidationError("k out of range")
    return np.linalg.eigvalsh(L)[:k]


def spectral_clustering(P, k: int, seed: int = 0) -> np.ndarray:
    """Spectral partition from the unnormalized Laplacian null space.

    Embeds each point in the k eigenvectors with smallest eigenvalue and
    runs k-means++ (10 restarts, 300 iterations, seeded) on the rows.
    """
    L = laplacian(P)
    if not 1 <= k <= L.shape[0]:
        raise ValidationError("k out of range")
    _, vecs = np.linalg.eigh(L)
    embedding = vecs[:, :k]
    km = KMeans(n_clusters=k, init="k-means++", n_init=10, max_iter=300,
                random_state=seed)
    return km.fit_predict(embedding)


def adjusted_rand_index(a, b) -> float:
    """Pair-counting agreement between two labelings, corrected for chance."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValidationError("labelings must have equal length")
    return float(_sk_ari(a, b))


def silhouette_score(Z, labels) -> float:
    """Mean silhouette with Euclidean distances; singletons score 0."""
    Z = np.asarray(Z, dtype=np.float64)
    labels = np.asarray(labels).ravel()
    if Z.shape[0] != labels.shape[0]:
        raise ValidationError("labels must match the number of points")
    if np.unique(labels).size < 2:
        raise ValidationError("silhouette needs at least two clusters")
    return float(_sk_silhouette(Z, labels, metric="euclidean"))


def trustworthiness(X, Z, n_neighbors: int = 5) -> float:
    """Penalized rank agreement between input and embedding neighborhoods."""
    X = np.asarray(X, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    n = X.shape[0]
    if Z.shape[0] != n:
        raise ValidationError("X and Z must have the same number of rows")
    if not 1 <= n_neighbors < n / 2:
        raise ValidationError("n_neighbors must satisfy 1 <= k < n/2")
    return float(_sk_trustworthiness(X, Z, n_neighbors=n_neighbors))
