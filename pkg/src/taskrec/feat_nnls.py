"""Feature-preference model: non-negative worker weights over task features."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .data import (
    ConfidenceWeights,
    InteractionMatrix,
    PreferenceMatrix,
    TaskFeatureMatrix,
    build_confidence,
    build_preference,
)
from .parallel import map_rows
from .solvers import SolverError, nnls

RESIDUALS = ("normal", "objective")


@dataclass
class FeatModel:
    """Worker x feature preference matrix.

    ``kind`` is ``"feat-nnls"`` for the constrained model and ``"feat-reg"``
    for the unconstrained ridge baseline (whose entries may be negative).
    """

    x: np.ndarray
    alpha: float
    lam: float
    kind: str = "feat-nnls"
    residual: str = "normal"
    ids: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def feature_count(self) -> int:
        return self.x.shape[1]

    @property
    def n_workers(self) -> int:
        return self.x.shape[0]

    def predict(self, y: TaskFeatureMatrix) -> np.ndarray:
        return predict_feat(self, y)


def assemble_worker_system(
    y: TaskFeatureMatrix,
    q: ConfidenceWeights,
    p: PreferenceMatrix,
    w: int,
    lam: float,
    gram: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Normal equations ``(Y^T Q^w Y + lam I, Y^T Q^w p_w)`` of worker ``w``.

    ``Y^T Q^w Y`` is built as ``Y^T Y + Y_+^T (Q_+ - I) Y_+`` where ``Y_+``
    holds the rows of the tasks worker ``w`` completed, so only those rows are
    touched beyond the shared Gram matrix (pass it as ``gram`` to reuse it).
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    yd = y.dense
    if gram is None:
        gram = yd.T @ yd
    lo, hi = q.csr.indptr[w], q.csr.indptr[w + 1]
    tasks = q.csr.indices[lo:hi]
    conf = q.csr.data[lo:hi]
    prefs = p.csr.data[p.csr.indptr[w] : p.csr.indptr[w + 1]]
    ypos = yd[tasks]
    a = gram + (ypos.T * (conf - 1.0)) @ ypos
    a[np.diag_indices_from(a)] += lam
    b = ypos.T @ (conf * prefs)
    return a, b


def fit_feat_nnls(
    c: InteractionMatrix,
    y: TaskFeatureMatrix,
    alpha: float = 50.0,
    lam: float = 0.01,
    *,
    residual: str = "normal",
    threads: int = 1,
) -> FeatModel:
    """Fit one non-negative preference vector per worker.

    With ``residual="normal"`` each row solves ``min ||A_w x - b_w||^2,
    x >= 0`` with ``A_w, b_w`` from :func:`assemble_worker_system`.  That
    agrees with the weighted objective only when no bound is active.
    ``residual="objective"`` instead minimizes the weighted objective itself
    under ``x >= 0``: with ``A_w = L L^T`` it solves the NNLS problem
    ``min ||L^T x - L^{-1} b_w||^2``, which differs from
    ``x^T A_w x - 2 b_w^T x`` by a constant.

    Workers are independent; ``threads`` only changes how rows are
    scheduled, never the result.
    """
    if residual not in RESIDUALS:
        raise ValueError(f"residual must be one of {RESIDUALS}, got {residual!r}")
    if c.n_tasks != y.n_tasks:
        raise ValueError(f"interactions cover {c.n_tasks} tasks, features cover {y.n_tasks}")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    q = build_confidence(c, alpha)
    p = build_preference(c)
    gram = y.dense.T @ y.dense
    x = np.zeros((c.n_workers, y.n_features))

    def solve(w):
        a, b = assemble_worker_system(y, q, p, w, lam, gram=gram)
        if not b.any():
            return  # A_w is SPD, so b = 0 forces x = 0
        try:
            if residual == "normal":
                x[w] = nnls(a, b).x
            else:
                chol = np.linalg.cholesky(a)
                x[w] = nnls(chol.T, solve_triangular(chol, b, lower=True)).x
        except SolverError as exc:
            raise exc.with_context(worker=w)

    map_rows(solve, c.n_workers, threads)
    return FeatModel(x=x, alpha=float(alpha), lam=float(lam), kind="feat-nnls", residual=residual)


def predict_feat(model: FeatModel, y: TaskFeatureMatrix) -> np.ndarray:
    """Scores ``x_w . y_i`` for every worker/task pair."""
    if model.x.shape[1] != y.n_features:
        raise ValueError(
            f"model has {model.x.shape[1]} features, task matrix has {y.n_features}"
        )
    return model.x @ y.dense.T
