"""Comparison methods: ALS with popularity-weighted negatives, and ridge
regression of counts on task features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import InteractionMatrix, TaskFeatureMatrix, build_confidence, build_preference
from .feat_nnls import FeatModel
from .ifts import LatentModel, _solve_rows, _transpose, init_factors, run_sweeps
from .solvers import SolverError, spd_solve

KINDS = ("als-neg", "feat-reg")


@dataclass(frozen=True)
class BaselineConfig:
    kind: str = "als-neg"
    alpha: float = 50.0
    beta_neg: float = 1.0
    lam: float = 0.01
    n_factors: int = 20
    iterations: int = 15
    seed: int = 42

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.kind == "als-neg" and self.n_factors < 1:
            raise ValueError("n_factors must be >= 1")
        if self.beta_neg < 0:
            raise ValueError("beta_neg must be non-negative")


def negative_weights(c: InteractionMatrix, beta_neg: float) -> np.ndarray:
    """Weight ``1 + beta_neg * pop_i`` an unobserved pair on task ``i`` carries."""
    return 1.0 + beta_neg * c.task_totals().astype(np.float64)


def objective_als_neg(u, v, c: InteractionMatrix, alpha: float, beta_neg: float, lam: float) -> float:
    neg = negative_weights(c, beta_neg)
    weights = np.broadcast_to(neg, c.shape).copy()
    pos = c.to_dense() > 0
    weights[pos] = (1.0 + alpha * c.to_dense())[pos]
    resid = pos.astype(np.float64) - u @ v.T
    return float(np.sum(weights * resid**2)) + lam * (float(np.sum(u * u)) + float(np.sum(v * v)))


def fit_implicit_als_neg(
    c: InteractionMatrix, config: BaselineConfig, *, threads: int = 1
) -> LatentModel:
    """Confidence-weighted ALS where unobserved pairs are weighted by task popularity.

    Observed pairs weigh ``1 + alpha * c``; an unobserved pair on task ``i``
    weighs ``1 + beta_neg * pop_i``.  Since that weight depends only on the
    task, the per-row systems still split into a shared Gram matrix plus a
    correction over the observed entries: ``V^T diag(neg) V`` on the worker
    side and ``neg_i U^T U`` on the task side.
    """
    if config.kind != "als-neg":
        raise ValueError("config.kind must be 'als-neg'")
    q = build_confidence(c, config.alpha)
    p = build_preference(c)
    p_t = _transpose(p)
    lam = config.lam
    neg = negative_weights(c, config.beta_neg) if config.beta_neg != 0 else None

    def sweep(u, v):
        if neg is None:
            vg = v.T @ v
            u = _solve_rows(v, q.csr, p.csr, lam, lambda r: vg, lambda r, cols: 1.0, None, threads, "worker")
            ug = u.T @ u
            v = _solve_rows(u, q.csr_t, p_t, lam, lambda r: ug, lambda r, cols: 1.0, None, threads, "task")
        else:
            vg = (v.T * neg) @ v
            u = _solve_rows(v, q.csr, p.csr, lam, lambda r: vg, lambda r, cols: neg[cols], None, threads, "worker")
            ug = u.T @ u
            v = _solve_rows(u, q.csr_t, p_t, lam, lambda r: neg[r] * ug, lambda r, cols: neg[r], None, threads, "task")
        return u, v

    u0 = init_factors(c.n_workers, config.n_factors, config.seed)
    v0 = init_factors(c.n_tasks, config.n_factors, config.seed + 1)
    u, v, trace = run_sweeps(
        sweep,
        lambda u, v: objective_als_neg(u, v, c, config.alpha, config.beta_neg, lam),
        u0,
        v0,
        config.iterations,
        None,
    )
    return LatentModel(
        u=u,
        v=v,
        alpha=float(config.alpha),
        lam=float(lam),
        iterations=int(config.iterations),
        seed=int(config.seed),
        objective_trace=trace,
        kind="als-neg",
        beta_neg=float(config.beta_neg),
    )


def fit_feature_reg(c: InteractionMatrix, y: TaskFeatureMatrix, lam: float = 0.01) -> FeatModel:
    """Ridge regression of each worker's raw count vector on task features.

    ``x_w = (Y^T Y + lam I)^{-1} Y^T c_w`` with zeros as targets.  No
    confidence weighting and no sign constraint.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if c.n_tasks != y.n_tasks:
        raise ValueError(f"interactions cover {c.n_tasks} tasks, features cover {y.n_tasks}")
    yd = y.dense
    a = yd.T @ yd
    a[np.diag_indices_from(a)] += lam
    rhs = np.asarray((c.csr.astype(np.float64) @ yd)).T
    try:
        x = spd_solve(a, rhs).T if rhs.size else np.zeros((c.n_workers, y.n_features))
    except SolverError as exc:
        raise exc.with_context(model="feat-reg")
    return FeatModel(x=np.ascontiguousarray(x), alpha=0.0, lam=float(lam), kind="feat-reg")
