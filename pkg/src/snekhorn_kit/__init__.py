"""Entropic, doubly stochastic and symmetric entropic affinities.

Affinity solvers (per-row entropic bandwidths, symmetric Sinkhorn,
symmetric entropic affinities by dual ascent or Dykstra projections),
embedding optimizers coupling them with latent Sinkhorn plans, and the
evaluation harness (synthetic generators, spectral clustering, metric
suite) behind the ``snekhorn-kit`` command line tool.
"""

__version__ = "0.1.0"

from .core import (
    Affinity,
    AffinityKind,
    CostMatrix,
    ProbVector,
    SolverError,
    ValidationError,
    entropy,
    kl_divergence,
    log_sum_exp,
    pairwise_sq_euclidean,
    perplexity,
    row_entropies,
)
from .datasets import Dataset, gen_multinomial_batch, gen_three_gaussians
from .embedding import (
    EmbedConfig,
    Embedding,
    embed,
    embed_baseline_sne,
    embed_doubly_stochastic_mismatch_demo,
    latent_cost,
    radial_ratio,
    snekhorn_gradient,
    snekhorn_loss,
)
from .entropic import (
    EASolution,
    calibrate_rs_nu,
    row_stochastic_gaussian,
    solve_ea,
    symmetrize_l2,
)
from .metrics import (
    adjusted_rand_index,
    laplacian_spectrum,
    pca_reduce,
    silhouette_score,
    spectral_clustering,
    trustworthiness,
)
from .sea import (
    KKTReport,
    SEASolution,
    kl_project_hxi,
    kl_project_symmetric,
    sea_dual_gradients,
    sea_dual_objective,
    sea_primal_from_duals,
    solve_sea_dual_ascent,
    solve_sea_dykstra,
    verify_kkt_sea,
)
from .sinkhorn import (
    SinkhornSolution,
    calibrate_nu,
    global_entropy,
    solve_sinkhorn_symmetric,
)

__all__ = [name for name in dir() if not name.startswith("_")]
