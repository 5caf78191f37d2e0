"""Holdout evaluation: random split, Mean Percentile Ranking and the top-t%
precision-recall curve."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import InteractionMatrix, TaskFeatureMatrix
from .rng import SplitMix64


class UndefinedMetricError(ValueError):
    """Raised when a metric has nothing to average (empty test set)."""


@dataclass(frozen=True)
class HoldoutSplit:
    train: InteractionMatrix
    test: InteractionMatrix
    ratio: float
    seed: int


def split_holdout(c: InteractionMatrix, ratio: float = 0.9, seed: int = 42) -> HoldoutSplit:
    """Shuffle the observed pairs and cut them into train and test.

    Pairs are ordered by (worker, task), permuted by a splitmix64 Fisher-Yates
    shuffle, and the first ``round(ratio * n)`` go to train.  Each pair moves
    with its full count.  Both sides keep the original shape.
    """
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    workers, tasks, counts = c.entries()
    n = workers.size
    if n < 2:
        raise ValueError("need at least two observed pairs to split")
    n_train = int(math.floor(ratio * n + 0.5))
    n_train = min(max(n_train, 1), n - 1)
    perm = SplitMix64(seed).permutation(n)
    tr, te = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    train = InteractionMatrix.from_triples(workers[tr], tasks[tr], counts[tr], c.shape)
    test = InteractionMatrix.from_triples(workers[te], tasks[te], counts[te], c.shape)
    return HoldoutSplit(train=train, test=test, ratio=float(ratio), seed=int(seed))


def rank_candidates(scores: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Candidates ordered best first; ties go to the lower task index.

    This is the single ranking routine behind MPR, the PR curve and the
    ``recommend`` command.
    """
    candidates = np.sort(np.asarray(candidates, dtype=np.int64))
    order = np.argsort(-np.asarray(scores, dtype=np.float64)[candidates], kind="stable")
    return candidates[order]


def percentile_ranks(scores, candidates: Sequence[int]) -> dict[int, float]:
    """Percentile position of each candidate: 0 for the best, 100 for the worst."""
    ranked = rank_candidates(np.asarray(scores, dtype=np.float64), candidates)
    n = ranked.size
    if n == 0:
        raise ValueError("candidates must be non-empty")
    if n == 1:
        return {int(ranked[0]): 0.0}
    return {int(t): 100.0 * r / (n - 1) for r, t in enumerate(ranked)}


def _candidate_rankings(scores: np.ndarray, split: HoldoutSplit):
    """Yield ``(worker, ranked candidates, test tasks, test counts)`` for
    every worker with at least one held-out pair, in worker order."""
    if scores.shape != split.test.shape:
        raise ValueError(f"score matrix has shape {scores.shape}, data has {split.test.shape}")
    if split.test.nnz == 0:
        raise UndefinedMetricError("test set is empty")
    n_tasks = split.test.n_tasks
    for w in range(split.test.n_workers):
        test_tasks, test_counts = split.test.row(w)
        if test_tasks.size == 0:
            continue
        seen = np.zeros(n_tasks, dtype=bool)
        seen[split.train.row(w)[0]] = True
        ranked = rank_candidates(scores[w], np.flatnonzero(~seen))
        yield w, ranked, test_tasks, test_counts


def mpr(scores: np.ndarray, split: HoldoutSplit) -> float:
    """Count-weighted mean percentile rank of the held-out pairs (lower is better).

    Each worker's candidates are all tasks outside that worker's training
    pairs.
    """
    num = 0.0
    den = 0
    for _, ranked, test_tasks, test_counts in _candidate_rankings(np.asarray(scores), split):
        n = ranked.size
        position = np.empty(split.test.n_tasks, dtype=np.int64)
        position[ranked] = np.arange(n)
        pos = position[test_tasks]
        rho = 100.0 * pos / (n - 1) if n > 1 else np.zeros(pos.size)
        num += float(np.sum(test_counts * rho))
        den += int(np.sum(test_counts))
    return num / den


def pr_curve(scores: np.ndarray, split: HoldoutSplit) -> list[tuple[int, float, float]]:
    """Precision and recall of held-out pairs in each worker's top ``t%``.

    For ``t = 1..100`` every worker with held-out pairs contributes its top
    ``ceil(t * n_cand / 100)`` candidates; hits and selections are pooled
    across workers before dividing.
    """
    t = np.arange(1, 101)
    hits = np.zeros(100, dtype=np.int64)
    selected = np.zeros(100, dtype=np.int64)
    total = 0
    for _, ranked, test_tasks, _ in _candidate_rankings(np.asarray(scores), split):
        n = ranked.size
        position = np.empty(split.test.n_tasks, dtype=np.int64)
        position[ranked] = np.arange(n)
        pos = np.sort(position[test_tasks])
        k = -(-t * n // 100)
        selected += k
        hits += np.searchsorted(pos, k, side="left")
        total += test_tasks.size
    return [
        (int(ti), float(h) / float(s) if s else 0.0, float(h) / float(total))
        for ti, h, s in zip(t, hits, selected)
    ]


@dataclass
class EvalReport:
    mpr: float | None = None
    pr_points: list[tuple[int, float, float]] | None = None
    metadata: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = []
        for key, val in self.metadata.items():
            if key == "runs":
                continue
            lines.append(f"{key}={_fmt(val)}")
        for k, run in enumerate(self.metadata.get("runs", [])):
            if run.get("mpr") is not None:
                lines.append(f"run{k}_seed={run['seed']}")
                lines.append(f"run{k}_mpr={run['mpr']!r}")
        if self.mpr is not None:
            lines.append(f"mpr={self.mpr!r}")
        for t, prec, rec in self.pr_points or []:
            lines.append(f"pr_point={t},{prec!r},{rec!r}")
        return "\n".join(lines) + "\n"

    def curve_csv(self) -> str:
        rows = ["t_percent,precision,recall"]
        rows += [f"{t},{p!r},{r!r}" for t, p, r in self.pr_points or []]
        return "\n".join(rows) + "\n"

    def write(self, path, curve_path=None) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")
        if curve_path is not None and self.pr_points is not None:
            Path(curve_path).write_text(self.curve_csv(), encoding="utf-8")

    @classmethod
    def from_text(cls, text: str) -> "EvalReport":
        report = cls(metadata={})
        points = []
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, val = line.partition("=")
            if key == "mpr":
                report.mpr = float(val)
            elif key == "pr_point":
                t, p, r = val.split(",")
                points.append((int(t), float(p), float(r)))
            else:
                report.metadata[key] = val
        if points:
            report.pr_points = points
        return report


def _fmt(val) -> str:
    if isinstance(val, float):
        return repr(val)
    return str(val)


@dataclass(frozen=True)
class ModelConfig:
    """What to train inside :func:`run_protocol`.

    ``kind`` is one of ``feat-nnls``, ``ifts``, ``als-neg``, ``feat-reg``;
    the model seed is taken from the run, not from here.
    """

    kind: str
    alpha: float = 50.0
    lam: float = 0.01
    n_factors: int = 20
    iterations: int = 15
    beta_neg: float = 1.0
    residual: str = "normal"

    def hyperparameters(self) -> dict:
        common = {"alpha": self.alpha, "lambda": self.lam}
        if self.kind == "feat-nnls":
            return {**common, "residual": self.residual}
        if self.kind == "feat-reg":
            return {"lambda": self.lam}
        extra = {"factors": self.n_factors, "iters": self.iterations}
        if self.kind == "als-neg":
            extra["beta_neg"] = self.beta_neg
        return {**common, **extra}


def train_and_score(
    config: ModelConfig, train: InteractionMatrix, y: TaskFeatureMatrix | None, seed: int, threads: int = 1
):
    """Fit ``config`` on ``train``; return ``(model, score matrix)``."""
    from .baselines import BaselineConfig, fit_feature_reg, fit_implicit_als_neg
    from .feat_nnls import fit_feat_nnls, predict_feat
    from .ifts import fit_ifts, predict_latent

    if config.kind == "feat-nnls":
        model = fit_feat_nnls(train, y, config.alpha, config.lam, residual=config.residual, threads=threads)
        return model, predict_feat(model, y)
    if config.kind == "feat-reg":
        model = fit_feature_reg(train, y, config.lam)
        return model, predict_feat(model, y)
    if config.kind == "ifts":
        model = fit_ifts(
            train, y, config.n_factors, config.alpha, config.lam, config.iterations, seed, threads=threads
        )
        return model, predict_latent(model)
    if config.kind == "als-neg":
        bc = BaselineConfig(
            kind="als-neg",
            alpha=config.alpha,
            beta_neg=config.beta_neg,
            lam=config.lam,
            n_factors=config.n_factors,
            iterations=config.iterations,
            seed=seed,
        )
        model = fit_implicit_als_neg(train, bc, threads=threads)
        return model, predict_latent(model)
    raise ValueError(f"unknown model kind {config.kind!r}")


def run_protocol(
    c: InteractionMatrix,
    y: TaskFeatureMatrix | None,
    model_config: ModelConfig,
    ratio: float = 0.9,
    base_seed: int = 42,
    *,
    n_runs: int = 3,
    metrics: str = "both",
    threads: int = 1,
    fixed_seed: bool = False,
) -> EvalReport:
    """Split, train and evaluate ``n_runs`` times and average.

    Run ``k`` uses seed ``base_seed + k`` for both the split and the model
    (``fixed_seed=True`` reuses ``base_seed`` for every run).  MPR is the
    arithmetic mean over runs, the PR curve the pointwise mean.
    """
    if metrics not in ("mpr", "pr", "both"):
        raise ValueError(f"metrics must be mpr, pr or both, got {metrics!r}")
    runs = []
    curves = []
    for k in range(n_runs):
        seed = base_seed if fixed_seed else base_seed + k
        split = split_holdout(c, ratio, seed)
        _, scores = train_and_score(model_config, split.train, y, seed, threads)
        run = {"seed": seed, "mpr": None}
        if metrics in ("mpr", "both"):
            run["mpr"] = mpr(scores, split)
        if metrics in ("pr", "both"):
            curves.append(pr_curve(scores, split))
        runs.append(run)

    report = EvalReport(
        metadata={
            "kind": model_config.kind,
            **model_config.hyperparameters(),
            "seed": base_seed,
            "ratio": float(ratio),
            "n_runs": n_runs,
            "runs": runs,
        }
    )
    if metrics in ("mpr", "both"):
        report.mpr = math.fsum(r["mpr"] for r in runs) / n_runs
    if curves:
        arr = np.array([[(p, r) for _, p, r in curve] for curve in curves])
        mean = arr.mean(axis=0)
        report.pr_points = [(t, float(mean[t - 1, 0]), float(mean[t - 1, 1])) for t in range(1, 101)]
    return report
