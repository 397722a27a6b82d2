"""Synthetic dataset generators for the evaluation harness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ValidationError

# unit equilateral triangle scaled by 8; separation well above the
# largest default component std
_TRI_CENTERS = 8.0 * np.array(
    [[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]]
)


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    labels: np.ndarray | None
    name: str
    seed: int


def gen_three_gaussians(n_per: int = 30,
                        stds: tuple[float, float, float] = (0.3, 1.0, 2.0),
                        seed: int = 0) -> Dataset:
    """2-D mixture of three isotropic Gaussians with distinct spreads.

    ``n_per`` points per component around fixed equilateral-triangle
    centers (side 8); labels are the component indices.
    """
    stds = tuple(float(s) for s in stds)
    if len(stds) != 3 or any(s < 0 for s in stds):
        raise ValidationError("stds must be three nonnegative values")
    if n_per < 1:
        raise ValidationError("n_per must be positive")
    rng = np.random.default_rng(seed)
    parts = []
    for center, std in zip(_TRI_CENTERS, stds):
        parts.append(center + std * rng.standard_normal((n_per, 2)))
    X = np.concatenate(parts, axis=0)
    labels = np.repeat(np.arange(3), n_per)
    return Dataset(X=X, labels=labels, name="three-gaussians", seed=seed)


def gen_multinomial_batch(seed: int = 0, dims: int = 10000,
                          counts: tuple[int, int, int] = (500, 250, 250),
                          trials: tuple[int, int, int] = (1000, 1000, 10000)
                          ) -> Dataset:
    """Two multinomial populations measured at two noise levels.

    Draws two composition vectors uniformly on the ``dims``-simplex; the
    first group samples the first composition, the remaining two groups
    sample the second one with differing trial counts, emulating a batch
    effect.  Rows are normalized to sum to one.  Labels are the group
    indices 0/1/2; groups 1 and 2 share the generating distribution, so
    the distribution label is ``min(label, 1)``.
    """
    counts = tuple(int(c) for c in counts)
    trials = tuple(int(t) for t in trials)
    if len(counts) != 3 or len(trials) != 3:
        raise ValidationError("counts and trials must have three entries")
    if any(c < 1 for c in counts) or any(t < 1 for t in trials):
        raise ValidationError("counts and trials must be positive")
    rng = np.random.default_rng(seed)
    p1 = rng.dirichlet(np.ones(dims))
    p2 = rng.dirichlet(np.ones(dims))
    parts = []
    for (count, trial), p in zip(zip(counts, trials), (p1, p2, p2)):
        raw = rng.multinomial(trial, p, size=count).astype(np.float64)
        parts.append(raw / raw.sum(axis=1, keepdims=True))
    X = np.concatenate(parts, axis=0)
    labels = np.repeat(np.arange(3), counts)
    return Dataset(X=X, labels=labels, name="multinomial", seed=seed)


def distribution_labels(ds: Dataset) -> np.ndarray:
    """Collapse multinomial group labels to the two source distributions."""
    if ds.labels is None:
        raise ValidationError("dataset has no labels")
    return np.minimum(ds.labels, 1)
