"""Command line front end: snekhorn-kit {gen|affinity|embed|eval|bench}.

Every run writes a ``config.json`` echo of the resolved parameters into
the output directory, sufficient to reproduce the outputs bit for bit.
Exit codes: 0 success, 2 validation/usage error, 3 solver
non-convergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, fileio
from .core import (
    SolverError,
    ValidationError,
    pairwise_sq_euclidean,
    row_entropies,
)
from .datasets import gen_multinomial_batch, gen_three_gaussians
from .embedding import (
    EmbedConfig,
    embed,
    embed_baseline_sne,
    embed_doubly_stochastic_mismatch_demo,
    radial_ratio,
)
from .entropic import calibrate_rs_nu, row_stochastic_gaussian, solve_ea, symmetrize_l2
from .metrics import (
    adjusted_rand_index,
    laplacian_spectrum,
    pca_reduce,
    silhouette_score,
    spectral_clustering,
    trustworthiness,
)
from .sea import solve_sea_dual_ascent, solve_sea_dykstra, verify_kkt_sea
from .sinkhorn import calibrate_nu, solve_sinkhorn_symmetric

log = logging.getLogger("snekhorn_kit")

_EMBED_ALGOS = ("snekhorn", "tsnekhorn", "sne", "tsne", "snekhorn-globalq")
_AFFINITY_METHODS = ("ea", "ea-sym", "rs", "rs-sym", "ds", "sea", "sea-dykstra")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snekhorn-kit",
        description="entropic / doubly stochastic / symmetric entropic "
                    "affinities, embeddings and evaluation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output-dir", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--log-level", default="warning",
                       choices=["debug", "info", "warning", "error"])

    p = sub.add_parser("gen", help="write a synthetic dataset")
    p.add_argument("generator", choices=["three-gaussians", "multinomial"])
    p.add_argument("--n-per", type=int, default=30)
    p.add_argument("--stds", default="0.3,1,2")
    p.add_argument("--dims", type=int, default=10000)
    p.add_argument("--counts", default="500,250,250")
    p.add_argument("--trials", default="1000,1000,10000")
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("affinity", help="compute an affinity matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--method", required=True, choices=_AFFINITY_METHODS)
    p.add_argument("--perplexity", type=float, default=None)
    p.add_argument("--bandwidth", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--exclude-self", action="store_true")
    p.add_argument("--pca", type=int, default=50)
    common(p)
    p.set_defaults(func=cmd_affinity)

    p = sub.add_parser("embed", help="optimize a low-dimensional embedding")
    p.add_argument("--input", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--algo", required=True, choices=_EMBED_ALGOS)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--rel-tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--sinkhorn-tol", type=float, default=1e-5)
    p.add_argument("--no-warm-start", action="store_true")
    p.add_argument("--pca", type=int, default=50)
    common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="score labels, embeddings or affinities")
    p.add_argument("--metric", required=True,
                   choices=["ari", "silhouette", "trustworthiness", "spectrum"])
    p.add_argument("--input", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--embedding", default=None)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--n-neighbors", type=int, default=5)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="grid of methods x perplexities x seeds")
    p.add_argument("--input", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--task", default="spectral", choices=["spectral", "embed"])
    p.add_argument("--methods", default=None,
                   help="comma list; affinities for spectral, algos for embed")
    p.add_argument("--metric", default="ari",
                   choices=["ari", "silhouette", "trustworthiness"])
    p.add_argument("--grid", default=None,
                   help="comma list of perplexities (default: multiples of 10 "
                        "in [10, min(n, 300)])")
    p.add_argument("--k", type=int, default=None,
                   help="cluster count (default: number of classes)")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--pca", type=int, default=50)
    common(p)
    p.set_defaults(func=cmd_bench)
    return parser


def _resolve_threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("SNEKHORN_THREADS")
    return max(1, int(env)) if env else 1


def _prepare_outdir(args) -> str:
    outdir = args.output_dir
    os.makedirs(outdir, exist_ok=True)
    config = {k: v for k, v in vars(args).items() if k != "func"}
    config["threads"] = _resolve_threads(args)
    config["version"] = __version__
    fileio.write_json(os.path.join(outdir, "config.json"), config)
    return outdir


def _load_features(args):
    X = fileio.read_matrix_csv(args.input)
    pca = getattr(args, "pca", 0)
    if pca and X.shape[1] > pca:
        log.info("applying PCA to %d dimensions", pca)
        X = pca_reduce(X, pca)
    return X


def _parse_floats(text):
    return tuple(float(v) for v in str(text).split(","))


def cmd_gen(args):
    outdir = args.output_dir
    if args.generator == "three-gaussians":
        ds = gen_three_gaussians(n_per=args.n_per,
                                 stds=_parse_floats(args.stds),
                                 seed=args.seed)
    else:
        counts = tuple(int(v) for v in args.counts.split(","))
        trials = tuple(int(v) for v in args.trials.split(","))
        ds = gen_multinomial_batch(seed=args.seed, dims=args.dims,
                                   counts=counts, trials=trials)
    fileio.write_matrix_csv(os.path.join(outdir, "data.csv"), ds.X,
                            meta={"kind": "features", "name": ds.name})
    fileio.write_labels_csv(os.path.join(outdir, "labels.csv"), ds.labels)
    fileio.write_json(os.path.join(outdir, "provenance.json"),
                      {"name": ds.name, "seed": ds.seed,
                       "shape": list(ds.X.shape)})


def _affinity_diagnostics(P, extra):
    ent = row_entropies(P)
    diag = {
        "entropy_per_row": ent,
        "perplexity_per_row": np.exp(ent - 1.0),
        "row_marginal_residual": float(np.abs(P.sum(axis=1) - 1.0).max()),
        "col_marginal_residual": float(np.abs(P.sum(axis=0) - 1.0).max()),
    }
    diag.update(extra)
    return diag


def cmd_affinity(args):
    outdir = args.output_dir
    X = _load_features(args)
    C = pairwise_sq_euclidean(X)
    method = args.method
    extra: dict = {"method": method}
    duals: dict = {}

    if method in ("ea", "ea-sym"):
        if args.perplexity is None:
            raise ValidationError(f"--perplexity is required for {method}")
        sol = solve_ea(C, args.perplexity, tol=args.tol or 1e-9,
                       max_iter=args.max_iter or 200,
                       exclude_self=args.exclude_self)
        P = sol.P if method == "ea" else symmetrize_l2(sol.P)
        duals["epsilon"] = sol.epsilon
        extra["iterations"] = sol.P.diagnostics.get("max_iter")
        extra["max_entropy_residual"] = float(sol.residuals.max())
    elif method in ("rs", "rs-sym"):
        if args.bandwidth is not None:
            P = row_stochastic_gaussian(C, args.bandwidth)
            extra["bandwidth"] = args.bandwidth
        elif args.perplexity is not None:
            nu, P = calibrate_rs_nu(C, args.perplexity,
                                    tol=args.tol or 1e-6)
            extra["bandwidth"] = nu
        else:
            raise ValidationError(f"{method} needs --bandwidth or --perplexity")
        if args.exclude_self:
            raise ValidationError("--exclude-self applies to ea methods only")
        if method == "rs-sym":
            P = symmetrize_l2(P)
    elif method == "ds":
        if args.bandwidth is not None:
            sol = solve_sinkhorn_symmetric(C, nu=args.bandwidth,
                                           tol=args.tol or 1e-6,
                                           max_iter=args.max_iter or 10000)
            nu = args.bandwidth
        elif args.perplexity is not None:
            nu, sol = calibrate_nu(C, args.perplexity, tol=args.tol or 1e-6)
        else:
            raise ValidationError("ds needs --bandwidth or --perplexity")
        P = sol.P
        duals["potential"] = sol.f
        extra.update({"bandwidth": nu, "iterations": sol.iters,
                      "residual": sol.residual})
    elif method in ("sea", "sea-dykstra"):
        if args.perplexity is None:
            raise ValidationError(f"--perplexity is required for {method}")
        if method == "sea":
            sol = solve_sea_dual_ascent(C, args.perplexity,
                                        tol=args.tol or 1e-6,
                                        max_iter=args.max_iter or 10000,
                                        lr=args.lr)
        else:
            sol = solve_sea_dykstra(C, args.perplexity, sigma=args.sigma,
                                    tol=args.tol or 1e-7,
                                    max_iter=args.max_iter or 20000)
        P = sol.P
        duals["gamma"] = sol.gamma
        duals["lambda"] = sol.lam
        report = verify_kkt_sea(C, sol)
        extra.update({
            "iterations": sol.P.diagnostics["iters"],
            "entropy_gap": sol.P.diagnostics["entropy_gap"],
            "marginal_gap": sol.P.diagnostics["marginal_gap"],
            "kkt_stationarity_residual": report.stationarity_residual,
            "one_row_unsaturated": sol.one_row_unsaturated,
        })

    entries = P.entries
    fileio.write_matrix_csv(os.path.join(outdir, "affinity.csv"), entries,
                            meta={"kind": P.kind.value})
    for name, vec in duals.items():
        fileio.write_matrix_csv(os.path.join(outdir, f"{name}.csv"),
                                np.asarray(vec)[None, :])
    fileio.write_json(os.path.join(outdir, "diagnostics.json"),
                      _affinity_diagnostics(entries, extra))


def _run_embedding(algo, X, cfg):
    if algo in ("snekhorn", "tsnekhorn"):
        return embed(X, cfg)
    if algo in ("sne", "tsne"):
        return embed_baseline_sne(X, cfg)
    return embed_doubly_stochastic_mismatch_demo(X, cfg)


def _embed_config(args, algo) -> EmbedConfig:
    kernel = "student" if algo in ("tsnekhorn", "tsne") else "gaussian"
    affinity_in = "ea-sym" if algo in ("sne", "tsne") else "sea"
    return EmbedConfig(
        q=args.dim, kernel=kernel, affinity_in=affinity_in,
        perplexity=args.perplexity, lr=args.lr, max_iter=args.max_iter,
        rel_tol=args.rel_tol, seed=args.seed,
        sinkhorn_tol=args.sinkhorn_tol,
        warm_start=not args.no_warm_start,
    )


def cmd_embed(args):
    outdir = args.output_dir
    X = _load_features(args)
    cfg = _embed_config(args, args.algo)
    result = _run_embedding(args.algo, X, cfg)
    fileio.write_matrix_csv(os.path.join(outdir, "embedding.csv"), result.Z,
                            meta={"kind": "embedding", "algo": args.algo})
    fileio.write_matrix_csv(os.path.join(outdir, "loss_trace.csv"),
                            result.loss_trace[:, None])
    metrics = {
        "final_loss": float(result.loss_trace[-1]),
        "iterations": int(result.diagnostics["iters"]),
        "total_sinkhorn_iterations": int(result.sinkhorn_iters_trace.sum()),
    }
    if args.algo == "snekhorn-globalq":
        metrics["radial_ratio"] = result.diagnostics["radial_ratio"]
    if args.labels:
        labels = fileio.read_labels_csv(args.labels)
        k = int(np.unique(labels).size)
        from sklearn.cluster import KMeans

        pred = KMeans(n_clusters=k, n_init=10, max_iter=300,
                      random_state=args.seed).fit_predict(result.Z)
        metrics["silhouette"] = silhouette_score(result.Z, labels)
        metrics["kmeans_ari"] = adjusted_rand_index(pred, labels)
        metrics["trustworthiness"] = trustworthiness(X, result.Z)
    fileio.write_json(os.path.join(outdir, "metrics.json"), metrics)


def cmd_eval(args):
    outdir = args.output_dir
    metric = args.metric
    payload: dict = {"metric": metric}
    if metric == "ari":
        if not args.labels:
            raise ValidationError("ari needs --labels")
        a = fileio.read_labels_csv(args.input)
        b = fileio.read_labels_csv(args.labels)
        payload["value"] = adjusted_rand_index(a, b)
    elif metric == "silhouette":
        if not args.labels:
            raise ValidationError("silhouette needs --labels")
        Z = fileio.read_matrix_csv(args.input)
        labels = fileio.read_labels_csv(args.labels)
        payload["value"] = silhouette_score(Z, labels)
    elif metric == "trustworthiness":
        if not args.embedding:
            raise ValidationError("trustworthiness needs --embedding")
        X = fileio.read_matrix_csv(args.input)
        Z = fileio.read_matrix_csv(args.embedding)
        payload["value"] = trustworthiness(X, Z, n_neighbors=args.n_neighbors)
    else:
        P = fileio.read_matrix_csv(args.input)
        spectrum = laplacian_spectrum(P, args.k)
        payload["value"] = spectrum
        fileio.write_matrix_csv(os.path.join(outdir, "spectrum.csv"),
                                spectrum[None, :])
    fileio.write_json(os.path.join(outdir, "metrics.json"), payload)


def _default_grid(n: int) -> list[float]:
    top = min(n, 300)
    return [float(x) for x in range(10, top + 1, 10) if x <= n - 1]


def _bench_affinity(method, C, xi):
    if method == "ea-sym":
        return symmetrize_l2(solve_ea(C, xi).P)
    if method == "rs-sym":
        return symmetrize_l2(calibrate_rs_nu(C, xi)[1])
    if method == "ds":
        return calibrate_nu(C, xi)[1].P
    if method == "sea":
        return solve_sea_dual_ascent(C, xi).P
    raise ValidationError(f"unknown bench affinity method {method!r}")


def cmd_bench(args):
    outdir = args.output_dir
    X = _load_features(args)
    labels = fileio.read_labels_csv(args.labels)
    n = X.shape[0]
    k = args.k or int(np.unique(labels).size)
    seeds = list(range(args.seeds))
    grid = ([float(v) for v in args.grid.split(",")] if args.grid
            else _default_grid(n))
    if not grid:
        raise ValidationError("empty perplexity grid")
    if args.task == "spectral":
        methods = (args.methods.split(",") if args.methods
                   else ["rs-sym", "ds", "ea-sym", "sea"])
    else:
        methods = (args.methods.split(",") if args.methods
                   else ["tsne", "tsnekhorn"])
    threads = _resolve_threads(args)
    C = pairwise_sq_euclidean(X) if args.task == "spectral" else None

    def run_cell(cell):
        method, xi = cell
        try:
            scores = []
            if args.task == "spectral":
                P = _bench_affinity(method, C, xi)
                for seed in seeds:
                    pred = spectral_clustering(P, k, seed=seed)
                    scores.append(_bench_score(args.metric, X, None, pred,
                                               labels, seed))
            else:
                base = argparse.Namespace(
                    dim=2, perplexity=xi, lr=0.1, max_iter=2000,
                    rel_tol=1e-5, sinkhorn_tol=1e-5, no_warm_start=False,
                    seed=0)
                for seed in seeds:
                    base.seed = seed
                    cfg = _embed_config(base, method)
                    emb = _run_embedding(method, X, cfg)
                    pred = None
                    if args.metric == "ari":
                        from sklearn.cluster import KMeans

                        pred = KMeans(n_clusters=k, n_init=10, max_iter=300,
                                      random_state=seed).fit_predict(emb.Z)
                    scores.append(_bench_score(args.metric, X, emb.Z, pred,
                                               labels, seed))
            return cell, scores, None
        except (ValidationError, SolverError) as exc:
            return cell, None, f"{type(exc).__name__}: {exc}"

    cells = [(m, xi) for m in methods for xi in grid]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run_cell, cells))
    else:
        outcomes = [run_cell(c) for c in cells]

    rows = ["method,perplexity,mean,std,n_seeds,error"]
    best: dict = {}
    for (method, xi), scores, error in outcomes:
        if error is None:
            mean = float(np.mean(scores))
            std = float(np.std(scores))
            rows.append(f"{method},{xi:g},{mean:.17g},{std:.17g},"
                        f"{len(scores)},")
            if method not in best or mean > best[method]["mean"]:
                best[method] = {"perplexity": xi, "mean": mean, "std": std}
        else:
            rows.append(f"{method},{xi:g},,,0,{error}")
    fileio.write_text(os.path.join(outdir, "results.csv"),
                      "\n".join(rows) + "\n")
    fileio.write_json(os.path.join(outdir, "best.json"), best)


def _bench_score(metric, X, Z, pred, labels, seed):
    if metric == "ari":
        return adjusted_rand_index(pred, labels)
    if metric == "silhouette":
        return silhouette_score(Z, labels)
    return trustworthiness(X, Z)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _prepare_outdir(args)
        args.func(args)
        return 0
    except ValidationError as exc:
        return _fail(args, exc, 2)
    except SolverError as exc:
        return _fail(args, exc, 3)
    except OSError as exc:
        return _fail(args, exc, 4)


def _fail(args, exc, code) -> int:
    print(f"error: {exc}", file=sys.stderr)
    try:
        fileio.write_json(
            os.path.join(args.output_dir, "error.json"),
            {"error": type(exc).__name__, "message": str(exc),
             "exit_code": code},
        )
    except OSError:
        pass
    return code


if __name__ == "__main__":
    sys.exit(main())
