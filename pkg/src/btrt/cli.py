"""Command-line pipelines: simulate, fit, rank-search, select, predict, glm,
diagnose, metrics.

Every run writes its outputs plus a ``manifest.cfg`` under the output
directory; rerunning a subcommand from that manifest reproduces the outputs
bit for bit.  Numerics run with the BLAS thread pool pinned to one thread so
results never depend on the machine's core count; ``--threads`` is accepted
for wall-time tuning of any embarrassingly parallel stages and never changes
results.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import io as btio
from .diagnostics import (
    EssSummary,
    FitReport,
    ess_columns,
    format_report,
    rmse,
    rmspe_pearson,
    trace_summary,
)
from .estimator import TuckerRegressor
from .glm import glm_coefficient_map
from .model import posterior_predict
from .selection import default_gap, rank_search, sequential_2means
from .simulate import SimConfig, gen_dataset, gen_regions
from .rng import RngStream

RUN_ROOT_ENV = "BTRT_RUN_ROOT"

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


def _out_dir(raw: str) -> Path:
    path = Path(raw)
    root = os.environ.get(RUN_ROOT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(args) -> btio.RunConfig:
    if getattr(args, "config", None):
        return btio.RunConfig.load(args.config)
    return btio.RunConfig()


def _write_manifest(cfg: btio.RunConfig, out: Path) -> None:
    btio.atomic_write_text(out / "manifest.cfg", cfg.dump())


def _progress_printer(every: int):
    if every <= 0:
        return None

    def emit(it, loglik):
        if it % every == 0:
            print(f"progress iter={it} loglik={loglik!r}", file=sys.stderr, flush=True)

    return emit


# ----------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    seed = args.seed if args.seed is not None else cfg.get_int("simulate.seed", 0)
    base = SimConfig()
    sim = SimConfig(
        dims=cfg.get_int_list("simulate.dims", base.dims),
        regions=cfg.get_int("simulate.regions", base.regions),
        radius_min=cfg.get_int("simulate.radius_min", base.radius_min),
        radius_max=cfg.get_int("simulate.radius_max", base.radius_max),
        peak=cfg.get_float("simulate.peak", base.peak),
        boundary_value=cfg.get_float("simulate.boundary_value", base.boundary_value),
        n=cfg.get_int("simulate.n", base.n),
        gamma_true=cfg.get_float_list("simulate.gamma_true", base.gamma_true),
        noise_variance=cfg.get_float("simulate.noise_variance", base.noise_variance),
        seed=seed,
    )
    out = _out_dir(args.out)
    root = RngStream(sim.seed)
    coef = gen_regions(root.substream(0), sim)
    data, truth = gen_dataset(root.substream(1), sim, coef)
    btio.write_tensor(np.moveaxis(data.X, 0, -1), out / "x.tensor")
    btio.write_column(data.y, out / "y.txt")
    if data.q:
        btio.write_csv_matrix(data.eta, out / "covariates.csv")
    btio.write_tensor(truth.coef, out / "truth.tensor")
    manifest = btio.RunConfig()
    for key, value in (
        ("simulate.dims", ",".join(str(d) for d in sim.dims)),
        ("simulate.regions", sim.regions),
        ("simulate.radius_min", sim.radius_min),
        ("simulate.radius_max", sim.radius_max),
        ("simulate.peak", repr(sim.peak)),
        ("simulate.boundary_value", repr(sim.boundary_value)),
        ("simulate.n", sim.n),
        ("simulate.gamma_true", ",".join(repr(g) for g in sim.gamma_true)),
        ("simulate.noise_variance", repr(sim.noise_variance)),
        ("simulate.seed", sim.seed),
    ):
        manifest.set(key, value)
    _write_manifest(manifest, out)
    print(f"simulated {data.n} subjects, dims {sim.dims} -> {out}")
    return EXIT_OK


def _fit_settings(cfg: btio.RunConfig, args):
    seed = args.seed if args.seed is not None else cfg.get_int("model.seed", 0)
    return {
        "ranks": cfg.get_int_list("model.ranks", (2, 2)),
        "n_iter": cfg.get_int("model.iterations", 11_000),
        "burn_in": cfg.get_int("model.burn_in", 1_000),
        "thin": cfg.get_int("model.thin", 1),
        "random_state": seed,
        "center_scale": cfg.get_bool("model.center_scale_response", True),
        "auto_raise_rank1": cfg.get_bool("model.auto_raise_rank1", False),
        "store_factors": cfg.get_bool("model.store_factors", False),
    }


def _record_fit_manifest(cfg, est, data_paths, out):
    manifest = btio.RunConfig()
    for key, value in data_paths.items():
        manifest.set(f"data.{key}", value)
    manifest.set("model.ranks", ",".join(str(r) for r in est.ranks_))
    manifest.set("model.iterations", est.draws_.manifest.iterations)
    manifest.set("model.burn_in", est.draws_.manifest.burn_in)
    manifest.set("model.thin", est.draws_.manifest.thin)
    manifest.set("model.seed", est.draws_.manifest.seed)
    manifest.set("model.center_scale_response", str(est.draws_.manifest.center_scale).lower())
    manifest.set("model.auto_raise_rank1", str(bool(est.auto_raise_rank1)).lower())
    manifest.set("model.store_factors", str(bool(est.store_factors)).lower())
    for key, value in est.hyper_.scalar_dict().items():
        manifest.set(f"hyper.{key}", repr(float(value)))
    if est.q_:
        manifest.set("hyper.mu_gamma", ",".join(repr(float(v)) for v in est.hyper_.mu_gamma))
        manifest.set(
            "hyper.sigma_gamma",
            ",".join(repr(float(v)) for v in np.diag(est.hyper_.sigma_gamma)),
        )
    sel = cfg.get_float("selection.s2means_b")
    if sel is not None:
        manifest.set("selection.s2means_b", repr(sel))
    fdr = cfg.get_float("selection.fdr_q")
    if fdr is not None:
        manifest.set("selection.fdr_q", repr(fdr))
    _write_manifest(manifest, out)


def _resolve_data_paths(cfg, args):
    data_dir = getattr(args, "data", None)
    paths = {}
    tensor = cfg.get_path("data.tensor", data_dir=data_dir)
    response = cfg.get_path("data.response", data_dir=data_dir)
    cov = cfg.get_path("data.covariates", data_dir=data_dir)
    if data_dir is not None:
        root = Path(data_dir)
        tensor = tensor or root / "x.tensor"
        response = response or root / "y.txt"
        if cov is None and (root / "covariates.csv").exists():
            cov = root / "covariates.csv"
    if tensor is None or response is None:
        raise btio.ConfigError(
            "fit needs [data] tensor/response entries or --data DIR"
        )
    paths["tensor"] = tensor
    paths["response"] = response
    if cov is not None:
        paths["covariates"] = cov
    return paths


def _load_dataset_from_paths(paths):
    cfg = btio.RunConfig()
    cfg.set("data.tensor", paths["tensor"])
    cfg.set("data.response", paths["response"])
    if "covariates" in paths:
        cfg.set("data.covariates", paths["covariates"])
    return btio.load_dataset(cfg)


def cmd_fit(args) -> int:
    cfg = _load_config(args)
    data_paths = _resolve_data_paths(cfg, args)
    data = _load_dataset_from_paths(data_paths)
    settings = _fit_settings(cfg, args)
    out = _out_dir(args.out)
    est = TuckerRegressor(progress=_progress_printer(args.progress), **settings)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est.fit(data.X, data.y, covariates=data.eta if data.q else None)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    btio.write_draws(est.draws_, out / "draws.bin")
    btio.atomic_write_text(out / "report.txt", format_report(est.report_))
    btio.write_column(est.loglik_trace_, out / "loglik_trace.txt")
    _record_fit_manifest(cfg, est, data_paths, out)
    print(
        f"fit ranks={est.ranks_} retained={est.draws_.manifest.retained} "
        f"dic={est.dic_.dic!r} -> {out}"
    )
    return EXIT_OK


def cmd_rank_search(args) -> int:
    cfg = _load_config(args)
    data_paths = _resolve_data_paths(cfg, args)
    data = _load_dataset_from_paths(data_paths)
    settings = _fit_settings(cfg, args)
    max_rank = args.max_rank or cfg.get_int("model.max_rank", 4)
    out = _out_dir(args.out)
    order = data.X.ndim - 1

    def fit_dic(ranks):
        local = dict(settings)
        local["ranks"] = ranks
        est = TuckerRegressor(**local)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            est.fit(data.X, data.y, covariates=data.eta if data.q else None)
        print(f"rank-search ranks={ranks} dic={est.dic_.dic!r}", file=sys.stderr)
        return est.dic_.dic

    trace = rank_search(fit_dic, order, max_rank)
    lines = [f"ranks={','.join(map(str, r))} dic={d!r}" for r, d in trace.visited]
    lines.append(f"selected={','.join(map(str, trace.selected))}")
    btio.atomic_write_text(out / "ranksearch.txt", "\n".join(lines) + "\n")
    manifest = _load_config(args)
    manifest.set("model.max_rank", max_rank)
    manifest.set("model.seed", settings["random_state"])
    _write_manifest(manifest, out)
    print(f"selected ranks {trace.selected} -> {out}")
    return EXIT_OK


def cmd_select(args) -> int:
    cfg = _load_config(args)
    draws_path = args.draws or cfg.get_path("data.draws")
    if draws_path is None:
        raise btio.ConfigError("select needs --draws FILE")
    draws = btio.read_draws(draws_path)
    gap = args.b if args.b is not None else cfg.get_float("selection.s2means_b")
    matrix = draws.coef_matrix()
    if gap is None:
        gap = default_gap(matrix)
    result = sequential_2means(matrix, gap)
    estimate = result.estimate.reshape(draws.manifest.dims)
    out = _out_dir(args.out)
    btio.write_tensor(estimate, out / "estimate.tensor")
    lines = [
        "[selection]",
        f"gap_b={result.gap!r}",
        "note=the zero count depends directly on gap_b; sweep it if in doubt",
        f"n_zero={result.n_zero}",
        f"n_nonzero={estimate.size - result.n_zero}",
    ]
    if args.truth:
        truth = btio.read_tensor(args.truth)
        lines.append(f"rmse={rmse(estimate, truth)!r}")
    btio.atomic_write_text(out / "selection.txt", "\n".join(lines) + "\n")
    manifest = btio.RunConfig()
    manifest.set("data.draws", draws_path)
    manifest.set("selection.s2means_b", repr(float(result.gap)))
    _write_manifest(manifest, out)
    print(f"selected {estimate.size - result.n_zero} nonzero cells -> {out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _load_config(args)
    draws_path = args.draws or cfg.get_path("data.draws")
    tensor_path = args.tensor or cfg.get_path("data.tensor")
    if draws_path is None or tensor_path is None:
        raise btio.ConfigError("predict needs --draws and --tensor (or a config)")
    cov_path = args.covariates or cfg.get_path("data.covariates")
    draws = btio.read_draws(draws_path)
    stacked = btio.read_tensor(tensor_path)
    X = np.ascontiguousarray(np.moveaxis(stacked, -1, 0))
    eta = btio.read_csv_matrix(cov_path) if cov_path else None
    level = args.level if args.level is not None else cfg.get_float(
        "model.predict_level", 0.95
    )
    level = float(level)
    alpha = (1.0 - level) / 2.0
    table = posterior_predict(draws, X, eta, quantiles=(alpha, 0.5, 1.0 - alpha))
    out = _out_dir(args.out)
    btio.write_column(table[:, 1], out / "predictions.txt")
    btio.write_csv_matrix(table, out / "intervals.csv", header=["low", "median", "high"])
    manifest = btio.RunConfig()
    manifest.set("data.draws", draws_path)
    manifest.set("data.tensor", tensor_path)
    if cov_path:
        manifest.set("data.covariates", cov_path)
    manifest.set("model.predict_level", repr(level))
    _write_manifest(manifest, out)
    print(f"wrote {table.shape[0]} predictions -> {out}")
    return EXIT_OK


def cmd_glm(args) -> int:
    cfg = _load_config(args)
    data_paths = _resolve_data_paths(cfg, args)
    data = _load_dataset_from_paths(data_paths)
    fdr_q = args.fdr if args.fdr is not None else cfg.get_float("selection.fdr_q", 0.05)
    coef_map, results = glm_coefficient_map(
        data.X, data.y, data.eta if data.q else None, fdr_q=fdr_q
    )
    out = _out_dir(args.out)
    btio.write_tensor(coef_map, out / "glm_map.tensor")
    dims = coef_map.shape
    index_cols = np.indices(dims).reshape(len(dims), -1).T
    table = np.column_stack([
        index_cols,
        results.estimate.reshape(-1),
        results.stderr.reshape(-1),
        results.pvalue.reshape(-1),
        results.rejected.reshape(-1).astype(float),
    ])
    header = [f"dim{k}" for k in range(len(dims))] + [
        "estimate", "stderr", "pvalue", "rejected",
    ]
    btio.write_csv_matrix(table, out / "glm_table.csv", header=header)
    manifest = btio.RunConfig()
    for key, value in data_paths.items():
        manifest.set(f"data.{key}", value)
    manifest.set("selection.fdr_q", repr(float(fdr_q)))
    _write_manifest(manifest, out)
    print(
        f"glm: {int(results.rejected.sum())} of {results.rejected.size} cells "
        f"significant at fdr={fdr_q} -> {out}"
    )
    return EXIT_OK


def cmd_diagnose(args) -> int:
    cfg = _load_config(args)
    draws_path = args.draws or cfg.get_path("data.draws")
    if draws_path is None:
        raise btio.ConfigError("diagnose needs --draws FILE (or a config)")
    truth_path = getattr(args, "truth", None) or cfg.get_path("data.truth")
    draws = btio.read_draws(draws_path)
    report = FitReport()
    ess_vals = ess_columns(draws.coef_matrix())
    report.coef_ess = EssSummary(
        minimum=float(ess_vals.min()),
        median=float(np.median(ess_vals)),
        maximum=float(ess_vals.max()),
    )
    report.trace = trace_summary(draws.loglik, 0)
    if truth_path is not None:
        report.rmse_coef = rmse(draws.coef.mean(axis=0), btio.read_tensor(truth_path))
    out = _out_dir(args.out)
    btio.atomic_write_text(out / "diagnose.txt", format_report(report))
    manifest = btio.RunConfig()
    manifest.set("data.draws", draws_path)
    if truth_path is not None:
        manifest.set("data.truth", truth_path)
    _write_manifest(manifest, out)
    print(
        f"ess median={report.coef_ess.median:.1f} "
        f"trace flags={report.trace.flags or 'none'} -> {out}"
    )
    return EXIT_OK


def cmd_metrics(args) -> int:
    cfg = _load_config(args)
    pred_path = args.pred or cfg.get_path("data.predictions")
    actual_path = args.actual or cfg.get_path("data.response")
    if pred_path is None or actual_path is None:
        raise btio.ConfigError("metrics needs --pred and --actual (or a config)")
    pred = btio.read_column(pred_path)
    actual = btio.read_column(actual_path)
    value, pearson = rmspe_pearson(pred, actual)
    text = f"rmspe={value!r}\npearson={'missing' if pearson is None else repr(pearson)}\n"
    sys.stdout.write(text)
    if args.out:
        out = _out_dir(args.out)
        btio.atomic_write_text(out / "metrics.txt", text)
        manifest = btio.RunConfig()
        manifest.set("data.predictions", pred_path)
        manifest.set("data.response", actual_path)
        _write_manifest(manifest, out)
    return EXIT_OK


# ----------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="btrt", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        return p

    p = add("simulate", cmd_simulate, help="generate a synthetic dataset")
    p.add_argument("--config", help="run config with a [simulate] section")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)

    for name, fn, extra in (
        ("fit", cmd_fit, True),
        ("rank-search", cmd_rank_search, True),
        ("glm", cmd_glm, False),
    ):
        p = add(name, fn, help=f"{name} pipeline")
        p.add_argument("--config")
        p.add_argument("--data", help="directory holding x.tensor / y.txt / covariates.csv")
        p.add_argument("--out", required=True)
        if extra:
            p.add_argument("--seed", type=int)
            p.add_argument("--progress", type=int, default=0,
                           help="emit iter/loglik to stderr every N sweeps")
        if name == "rank-search":
            p.add_argument("--max-rank", type=int)
        if name == "glm":
            p.add_argument("--fdr", type=float)

    p = add("select", cmd_select, help="sparsify posterior draws")
    p.add_argument("--config")
    p.add_argument("--draws")
    p.add_argument("--b", type=float, help="cluster-gap threshold")
    p.add_argument("--truth", help="optional truth tensor to score against")
    p.add_argument("--out", required=True)

    p = add("predict", cmd_predict, help="posterior predictive summaries")
    p.add_argument("--config")
    p.add_argument("--draws")
    p.add_argument("--tensor")
    p.add_argument("--covariates")
    p.add_argument("--level", type=float)
    p.add_argument("--out", required=True)

    p = add("diagnose", cmd_diagnose, help="chain diagnostics from a draws file")
    p.add_argument("--config")
    p.add_argument("--draws")
    p.add_argument("--truth", help="optional truth tensor to score the posterior mean")
    p.add_argument("--out", required=True)

    p = add("metrics", cmd_metrics, help="rmspe/pearson of predictions vs actuals")
    p.add_argument("--config")
    p.add_argument("--pred")
    p.add_argument("--actual")
    p.add_argument("--out")

    parser.add_argument("--threads", type=int, default=1,
                        help="thread budget for parallel stages (results never depend on it)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            return EXIT_USER_ERROR
        # numerics run single-threaded: BLAS reductions are only guaranteed
        # bit-stable at a fixed thread count
        with threadpool_limits(limits=1):
            return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR
    except (btio.TensorFileError, btio.ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR
    except (np.linalg.LinAlgError, FloatingPointError, NumericalFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
