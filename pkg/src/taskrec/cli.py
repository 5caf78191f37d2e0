"""Command-line entry point: ``taskrec <subcommand> ...``.

Exit codes: 0 on success, 1 on I/O or runtime failure, 2 on usage or
validation errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import BaselineConfig, fit_feature_reg, fit_implicit_als_neg
from .evaluation import (
    EvalReport,
    HoldoutSplit,
    ModelConfig,
    UndefinedMetricError,
    mpr,
    pr_curve,
    rank_candidates,
    run_protocol,
    split_holdout,
)
from .feat_nnls import FeatModel, fit_feat_nnls, predict_feat
from .ifts import LatentModel, fit_ifts, predict_latent
from .io import (
    DataFormatError,
    IdMaps,
    load_features,
    load_model,
    load_observations,
    save_model,
    widen,
    write_observations,
)
from .solvers import SolverError

MODELS = ("feat-nnls", "ifts", "als-neg", "feat-reg")
NEEDS_FEATURES = ("feat-nnls", "ifts", "feat-reg")

_logger = logging.getLogger("taskrec")


class UsageError(Exception):
    """Invalid combination of flags or inputs (exit code 2)."""


# -- argument types ----------------------------------------------------------


def _positive_float(text):
    val = float(text)
    if not val > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return val


def _nonneg_float(text):
    val = float(text)
    if not val >= 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return val


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return val


def _nonneg_int(text):
    val = int(text)
    if val < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return val


def _ratio(text):
    val = float(text)
    if not 0 < val < 1:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {text}")
    return val


def _add_hyper(p):
    p.add_argument("--alpha", type=_nonneg_float, default=50.0, help="confidence scale for positive counts")
    p.add_argument("--lambda", dest="lam", type=_positive_float, default=0.01, help="ridge regularization")
    p.add_argument("--factors", type=_positive_int, default=20, help="latent factors (ifts, als-neg)")
    p.add_argument("--iters", type=_positive_int, default=15, help="ALS sweeps (ifts, als-neg)")
    p.add_argument("--beta-neg", type=_nonneg_float, default=1.0, help="popularity weight of negatives (als-neg)")
    p.add_argument(
        "--residual",
        choices=("normal", "objective"),
        default="normal",
        help="feat-nnls residual: normal equations or the weighted objective",
    )


def _add_threads(p):
    p.add_argument("--threads", type=_positive_int, default=1, help="row-parallel worker threads (results do not depend on it)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taskrec",
        description="Implicit-feedback task recommendation with task features.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("split", help="hold out a random test set", formatter_class=fmt)
    p.add_argument("--observations", required=True, help="worker_id,task_id,count file")
    p.add_argument("--ratio", type=_ratio, default=0.9, help="training fraction of observed pairs")
    p.add_argument("--seed", type=int, default=42, help="shuffle seed")
    p.add_argument("--train-out", required=True, help="training observations to write")
    p.add_argument("--test-out", required=True, help="held-out observations to write")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser(
        "train",
        help="fit a model",
        formatter_class=fmt,
        description="Fit a model. Worker factors start from --seed, task factors from --seed + 1.",
    )
    p.add_argument("--model", required=True, help=f"one of {', '.join(MODELS)}")
    p.add_argument("--observations", required=True, help="worker_id,task_id,count file")
    p.add_argument("--features", default=None, help="task_id,feature_id file (required except for als-neg)")
    _add_hyper(p)
    p.add_argument("--seed", type=int, default=42, help="factor initialization seed")
    p.add_argument("--early-stop", type=_positive_float, default=None, help="stop when relative objective change falls below this")
    _add_threads(p)
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a model on a holdout split", formatter_class=fmt)
    p.add_argument("--model-file", required=True, help="model written by train")
    p.add_argument("--train", required=True, help="training observations (excluded from candidates)")
    p.add_argument("--test", required=True, help="held-out observations")
    p.add_argument("--features", default=None, help="task features (needed for feature models)")
    p.add_argument("--metric", choices=("mpr", "pr", "both"), default="both", help="metrics to report")
    p.add_argument("--out", required=True, help="key=value report file")
    p.add_argument("--curve-out", default=None, help="PR curve CSV (default: <out stem>.pr.csv)")
    p.add_argument("--no-plot", action="store_true", help="skip the PR curve PNG")
    _add_threads(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("recommend", help="print a worker's top tasks", formatter_class=fmt)
    p.add_argument("--model-file", required=True, help="model written by train")
    p.add_argument("--observations", required=True, help="training observations; completed tasks are skipped")
    p.add_argument("--features", default=None, help="task features (needed for feature models)")
    p.add_argument("--worker", required=True, help="external worker id")
    p.add_argument("--top-k", type=_positive_int, default=10, help="number of tasks to print")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("synth", help="generate a planted-preference dataset", formatter_class=fmt)
    p.add_argument("--workers", type=_positive_int, default=200, help="number of workers")
    p.add_argument("--tasks", type=_positive_int, default=150, help="number of tasks")
    p.add_argument("--n-features", type=_positive_int, default=30, help="size of the feature vocabulary")
    p.add_argument("--features-per-task", type=_nonneg_int, default=3, help="distinct features per task")
    p.add_argument("--active-features", type=_nonneg_int, default=5, help="active features per worker")
    p.add_argument("--intensity", type=_nonneg_float, default=2.0, help="Poisson rate scale")
    p.add_argument("--seed", type=int, default=42, help="generator seed")
    p.add_argument("--out-obs", required=True, help="observations file to write")
    p.add_argument("--out-feat", required=True, help="features file to write")
    p.add_argument("--out-truth", default=None, help="planted worker weights file to write")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser(
        "experiment",
        help="run the repeated holdout protocol for several models",
        formatter_class=fmt,
        description="Run k uses seed --seed + k for both the split and the model.",
    )
    p.add_argument("--observations", required=True, help="worker_id,task_id,count file")
    p.add_argument("--features", default=None, help="task_id,feature_id file")
    p.add_argument("--models", default=",".join(MODELS), help="comma-separated model kinds")
    p.add_argument("--ratio", type=_ratio, default=0.9, help="training fraction of observed pairs")
    p.add_argument("--seed", type=int, default=42, help="base seed")
    p.add_argument("--runs", type=_positive_int, default=3, help="repeated splits to average")
    _add_hyper(p)
    _add_threads(p)
    p.add_argument("--out-dir", required=True, help="directory for reports and figures")
    p.add_argument("--no-plot", action="store_true", help="skip the figures")
    p.set_defaults(func=cmd_experiment)
    return parser


# -- helpers -----------------------------------------------------------------


def _load_training(obs_path, feat_path, ids: IdMaps | None = None):
    c, ids = load_observations(obs_path, ids)
    y = None
    if feat_path is not None:
        y = load_features(feat_path, ids.tasks, ids.features)
        c = widen(c, len(ids.workers), len(ids.tasks))
    return c, y, ids


def _model_ids(model) -> IdMaps | None:
    if "worker_ids" not in model.ids or "task_ids" not in model.ids:
        return None
    return IdMaps.from_lists(
        model.ids["worker_ids"], model.ids["task_ids"], model.ids.get("feature_ids", [])
    )


def _scores(model, y, n_tasks: int) -> np.ndarray:
    if isinstance(model, FeatModel):
        if y is None:
            raise UsageError(f"{model.kind} models need --features")
        if y.n_features != model.x.shape[1]:
            raise UsageError(f"dimension mismatch: model has {model.x.shape[1]} features, data has {y.n_features}")
        return predict_feat(model, y)
    if model.v.shape[0] != n_tasks:
        raise UsageError(f"dimension mismatch: model has {model.v.shape[0]} tasks, data has {n_tasks}")
    return predict_latent(model)


def _universe(model, train_path, test_path, feat_path):
    """Index maps shared by model, train and test files."""
    ids = _model_ids(model)
    fixed = ids is not None
    if ids is None:
        ids = IdMaps()
    n_model_workers = model.x.shape[0] if isinstance(model, FeatModel) else model.u.shape[0]
    train, _ = load_observations(train_path, ids)
    y = None
    if feat_path is not None:
        y = load_features(feat_path, ids.tasks, ids.features)
    n_train_workers = len(ids.workers)
    test, _ = load_observations(test_path, ids)
    if fixed and isinstance(model, LatentModel) and len(ids.tasks) != model.v.shape[0]:
        raise UsageError(f"dimension mismatch: data references {len(ids.tasks) - model.v.shape[0]} task(s) unknown to the model")
    if not fixed and n_train_workers != n_model_workers:
        raise UsageError(f"dimension mismatch: model has {n_model_workers} workers, training data has {n_train_workers}")
    shape = (len(ids.workers), len(ids.tasks))
    if y is not None and y.n_tasks != shape[1]:
        y = load_features(feat_path, ids.tasks, dict(ids.features))
    return widen(train, *shape), widen(test, *shape), y, ids, n_model_workers


def _derived(path: str, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix)


# -- subcommands -------------------------------------------------------------


def cmd_split(args) -> int:
    c, ids = load_observations(args.observations)
    split = split_holdout(c, args.ratio, args.seed)
    write_observations(args.train_out, split.train, ids)
    write_observations(args.test_out, split.test, ids)
    print(f"train={split.train.nnz} test={split.test.nnz} seed={args.seed}")
    return 0


def cmd_train(args) -> int:
    if args.model not in MODELS:
        raise UsageError(f"unknown model {args.model!r}; choose from {', '.join(MODELS)}")
    if args.model in NEEDS_FEATURES and args.features is None:
        raise UsageError(f"--features is required for {args.model}")
    c, y, ids = _load_training(args.observations, args.features)
    start = time.perf_counter()
    if args.model == "feat-nnls":
        model = fit_feat_nnls(c, y, args.alpha, args.lam, residual=args.residual, threads=args.threads)
    elif args.model == "feat-reg":
        model = fit_feature_reg(c, y, args.lam)
    elif args.model == "ifts":
        model = fit_ifts(
            c, y, args.factors, args.alpha, args.lam, args.iters, args.seed,
            early_stop=args.early_stop, threads=args.threads,
        )
    else:
        config = BaselineConfig(
            kind="als-neg", alpha=args.alpha, beta_neg=args.beta_neg, lam=args.lam,
            n_factors=args.factors, iterations=args.iters, seed=args.seed,
        )
        model = fit_implicit_als_neg(c, config, threads=args.threads)
    elapsed = time.perf_counter() - start
    model.ids = {"worker_ids": IdMaps.ordered(ids.workers), "task_ids": IdMaps.ordered(ids.tasks)}
    if y is not None:
        model.ids["feature_ids"] = IdMaps.ordered(ids.features)
    save_model(args.out, model)
    if isinstance(model, FeatModel):
        dims = f"dims={model.x.shape[0]}x{model.x.shape[1]}"
        extra = ""
    else:
        dims = f"u_dims={model.u.shape[0]}x{model.u.shape[1]} v_dims={model.v.shape[0]}x{model.v.shape[1]}"
        extra = f" sweeps={len(model.objective_trace)} objective={model.objective_trace[-1]:.6g}"
    print(f"kind={model.kind} {dims} time={elapsed:.3f}s{extra}")
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model_file)
    train, test, y, ids, n_model_workers = _universe(model, args.train, args.test, args.features)
    scores = _scores(model, y, train.n_tasks)
    if scores.shape[0] < train.n_workers:
        cold = train.n_workers - scores.shape[0]
        print(f"warning: {cold} worker(s) unknown to the model are ranked with zero scores", file=sys.stderr)
        scores = np.vstack([scores, np.zeros((cold, scores.shape[1]))])
    split = HoldoutSplit(train=train, test=test, ratio=float("nan"), seed=0)
    meta = {"kind": model.kind, "alpha": model.alpha, "lambda": model.lam}
    if isinstance(model, LatentModel):
        meta.update(factors=model.n_factors, iters=model.iterations, seed=model.seed)
        if model.beta_neg is not None:
            meta["beta_neg"] = model.beta_neg
    meta["test_pairs"] = test.nnz
    report = EvalReport(metadata=meta)
    if args.metric in ("mpr", "both"):
        report.mpr = mpr(scores, split)
    curve_path = None
    if args.metric in ("pr", "both"):
        report.pr_points = pr_curve(scores, split)
        curve_path = args.curve_out or _derived(args.out, ".pr.csv")
    report.write(args.out, curve_path)
    if report.pr_points is not None and not args.no_plot:
        from .plotting import plot_pr_curves

        plot_pr_curves({model.kind: report.pr_points}, _derived(args.out, ".pr.png"))
    summary = f"kind={model.kind}"
    if report.mpr is not None:
        summary += f" mpr={report.mpr:.4f}"
    print(summary)
    return 0


def cmd_recommend(args) -> int:
    model = load_model(args.model_file)
    ids = _model_ids(model)
    c, ids = load_observations(args.observations, ids)
    y = None
    if args.features is not None:
        y = load_features(args.features, ids.tasks, ids.features)
    if args.worker not in ids.workers:
        raise UsageError(f"unknown worker {args.worker!r}")
    w = ids.workers[args.worker]
    n_tasks = y.n_tasks if y is not None else model.v.shape[0]
    scores = _scores(model, y, n_tasks)
    if w >= scores.shape[0]:
        raise UsageError(f"worker {args.worker!r} is not covered by the model")
    c = widen(c, max(c.n_workers, w + 1), max(c.n_tasks, n_tasks))
    tasks = IdMaps.ordered(ids.tasks)
    seen = np.zeros(n_tasks, dtype=bool)
    done = c.row(w)[0]
    seen[done[done < n_tasks]] = True
    ranked = rank_candidates(scores[w], np.flatnonzero(~seen))
    for rank, t in enumerate(ranked[: args.top_k], start=1):
        print(f"{rank},{tasks[t]},{float(scores[w, t])!r}")
    return 0


def cmd_synth(args) -> int:
    from .synthetic import generate_synthetic

    try:
        ds = generate_synthetic(
            args.workers, args.tasks, args.n_features, args.features_per_task,
            args.active_features, args.intensity, args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ds.write(args.out_obs, args.out_feat, args.out_truth)
    print(f"workers={args.workers} tasks={args.tasks} pairs={ds.counts.nnz} seed={args.seed}")
    return 0


def cmd_experiment(args) -> int:
    kinds = [k.strip() for k in args.models.split(",") if k.strip()]
    unknown = [k for k in kinds if k not in MODELS]
    if unknown or not kinds:
        raise UsageError(f"unknown model(s): {', '.join(unknown) or '(none)'}")
    if args.features is None and any(k in NEEDS_FEATURES for k in kinds):
        raise UsageError("--features is required for feature-based models")
    c, y, _ = _load_training(args.observations, args.features)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = {}
    lines = ["model,mpr"]
    for kind in kinds:
        config = ModelConfig(
            kind=kind, alpha=args.alpha, lam=args.lam, n_factors=args.factors,
            iterations=args.iters, beta_neg=args.beta_neg, residual=args.residual,
        )
        report = run_protocol(c, y, config, args.ratio, args.seed, n_runs=args.runs, threads=args.threads)
        report.write(out / f"{kind}.report.txt", out / f"{kind}.pr.csv")
        results[kind] = report
        lines.append(f"{kind},{report.mpr!r}")
        print(f"{kind} mpr={report.mpr:.4f}")
    (out / "mpr.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if not args.no_plot:
        from .plotting import plot_mpr_bars, plot_pr_curves

        plot_pr_curves({k: r.pr_points for k, r in results.items()}, out / "pr_curves.png")
        plot_mpr_bars({k: r.mpr for k, r in results.items()}, out / "mpr.png")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, DataFormatError, UndefinedMetricError) as exc:
        print(f"taskrec {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, SolverError) as exc:
        print(f"taskrec {args.command}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"taskrec {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
