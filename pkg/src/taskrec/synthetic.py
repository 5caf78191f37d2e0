"""Synthetic worker/task data with planted feature preferences."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import InteractionMatrix, TaskFeatureMatrix
from .io import FEAT_HEADER, OBS_HEADER, TRUTH_HEADER
from .rng import SplitMix64


@dataclass
class SyntheticTruth:
    x_true: np.ndarray
    params: dict


@dataclass
class SyntheticDataset:
    counts: InteractionMatrix
    features: TaskFeatureMatrix
    truth: SyntheticTruth

    @property
    def worker_ids(self) -> list[str]:
        return [f"w{w}" for w in range(self.counts.n_workers)]

    @property
    def task_ids(self) -> list[str]:
        return [f"t{i}" for i in range(self.counts.n_tasks)]

    @property
    def feature_ids(self) -> list[str]:
        return [f"f{l}" for l in range(self.features.n_features)]

    def write(self, obs_path, feat_path, truth_path=None) -> None:
        wids, tids, fids = self.worker_ids, self.task_ids, self.feature_ids
        w, t, n = self.counts.entries()
        with open(obs_path, "w", encoding="utf-8", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(OBS_HEADER)
            out.writerows([wids[a], tids[b], int(k)] for a, b, k in zip(w, t, n))
        with open(feat_path, "w", encoding="utf-8", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(FEAT_HEADER)
            for i, row in enumerate(self.features.rows):
                out.writerows([tids[i], fids[f]] for f in row)
        if truth_path is not None:
            with open(truth_path, "w", encoding="utf-8", newline="") as fh:
                out = csv.writer(fh, lineterminator="\n")
                out.writerow(TRUTH_HEADER)
                x = self.truth.x_true
                for a in range(x.shape[0]):
                    for f in np.flatnonzero(x[a]):
                        out.writerow([wids[a], fids[f], repr(float(x[a, f]))])


def poisson_inversion(rates: np.ndarray, u: np.ndarray, max_terms: int = 10_000) -> np.ndarray:
    """Poisson draws by walking the CDF until it passes ``u``."""
    rates = np.asarray(rates, dtype=np.float64)
    k = np.zeros(rates.shape, dtype=np.int64)
    term = np.exp(-rates)
    cdf = term.copy()
    active = u > cdf
    for _ in range(max_terms):
        if not active.any():
            break
        k[active] += 1
        term = np.where(active, term * rates / np.maximum(k, 1), term)
        cdf = np.where(active, cdf + term, cdf)
        # stop once the tail has vanished numerically
        active &= (u > cdf) & (term > 0)
    return k


def generate_synthetic(
    n_workers: int = 200,
    n_tasks: int = 150,
    n_features: int = 30,
    features_per_task: int = 3,
    active_features_per_worker: int = 5,
    intensity: float = 2.0,
    seed: int = 42,
) -> SyntheticDataset:
    """Sample tasks, planted worker preferences and Poisson completion counts.

    All draws come, in this order, from one splitmix64 stream: task feature
    sets, worker active features and their weights (uniform in [0.5, 1.5)),
    then one uniform per (worker, task) pair in row-major order for the
    count ``Poisson(intensity * x_true_w . y_i)``.
    """
    for name, val in (("n_workers", n_workers), ("n_tasks", n_tasks), ("n_features", n_features)):
        if val < 1:
            raise ValueError(f"{name} must be >= 1")
    if not 0 <= features_per_task <= n_features:
        raise ValueError("features_per_task must lie in [0, n_features]")
    if not 0 <= active_features_per_worker <= n_features:
        raise ValueError("active_features_per_worker must lie in [0, n_features]")
    if not intensity >= 0:
        raise ValueError("intensity must be non-negative")

    rng = SplitMix64(seed)
    y = TaskFeatureMatrix([rng.sample(n_features, features_per_task) for _ in range(n_tasks)], n_features)
    x_true = np.zeros((n_workers, n_features))
    for w in range(n_workers):
        active = sorted(rng.sample(n_features, active_features_per_worker))
        for f in active:
            x_true[w, f] = 0.5 + rng.uniform()
    rates = intensity * (x_true @ y.dense.T)
    u = rng.uniform_array(n_workers * n_tasks).reshape(n_workers, n_tasks)
    counts = poisson_inversion(rates, u)
    truth = SyntheticTruth(
        x_true=x_true,
        params=dict(
            n_workers=n_workers,
            n_tasks=n_tasks,
            n_features=n_features,
            features_per_task=features_per_task,
            active_features_per_worker=active_features_per_worker,
            intensity=intensity,
            seed=seed,
        ),
    )
    return SyntheticDataset(InteractionMatrix.from_dense(counts), y, truth)
