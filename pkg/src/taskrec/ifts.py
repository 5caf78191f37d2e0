"""Latent-factor model with a task-similarity penalty (IFTS).

Alternating least squares on worker factors ``U`` and task factors ``V``.
The task update pulls each ``v_i`` toward the factors of similar tasks,
weighted by the logistic feature-overlap similarity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import (
    ConfidenceWeights,
    InteractionMatrix,
    PreferenceMatrix,
    SimilarityMatrix,
    TaskFeatureMatrix,
    build_confidence,
    build_preference,
    task_similarity_matrix,
)
from .parallel import map_rows
from .rng import SplitMix64
from .solvers import SolverError, spd_solve

_logger = logging.getLogger(__name__)


@dataclass
class LatentModel:
    u: np.ndarray
    v: np.ndarray
    alpha: float
    lam: float
    iterations: int
    seed: int
    objective_trace: list[float] = field(default_factory=list)
    kind: str = "ifts"
    beta_neg: float | None = None
    ids: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_factors(self) -> int:
        return self.u.shape[1]

    def predict(self) -> np.ndarray:
        return predict_latent(self)


def init_factors(n_rows: int, n_factors: int, seed: int) -> np.ndarray:
    """Uniform ``[0, 1/sqrt(n_factors))`` entries from a splitmix64 stream."""
    if n_factors < 1:
        raise ValueError("n_factors must be >= 1")
    bound = 1.0 / math.sqrt(n_factors)
    draws = SplitMix64(seed).uniform_array(n_rows * n_factors)
    out = np.minimum(draws * bound, np.nextafter(bound, 0.0))
    return out.reshape(n_rows, n_factors)


def row_system(
    other: np.ndarray,
    cols: np.ndarray,
    conf: np.ndarray,
    prefs: np.ndarray,
    gram: np.ndarray,
    base,
    lam: float,
    extra_rhs: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Normal equations of one ALS row.

    ``A = gram + O_+^T diag(conf - base) O_+ + lam I`` and
    ``b = O_+^T (conf * prefs) (+ extra_rhs)``, where ``O_+ = other[cols]``
    are the factors of the row's observed entries and ``gram`` already holds
    the contribution of every entry at weight ``base``.
    """
    op = other[cols]
    a = gram + (op.T * (conf - base)) @ op
    a[np.diag_indices_from(a)] += lam
    b = op.T @ (conf * prefs)
    if extra_rhs is not None:
        b = b + extra_rhs
    return a, b


def _solve_rows(
    other: np.ndarray,
    conf_csr,
    pref_csr,
    lam: float,
    gram_of: Callable[[int], np.ndarray],
    base_of: Callable[[int, np.ndarray], np.ndarray | float],
    extra_rhs: np.ndarray | None,
    threads: int,
    label: str,
) -> np.ndarray:
    """One ALS half-step: solve :func:`row_system` for every row of ``conf_csr``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    n_rows = conf_csr.shape[0]
    out = np.zeros((n_rows, other.shape[1]))
    indptr, indices, data = conf_csr.indptr, conf_csr.indices, conf_csr.data
    pdata = pref_csr.data

    def solve(r):
        lo, hi = indptr[r], indptr[r + 1]
        cols = indices[lo:hi]
        a, b = row_system(
            other,
            cols,
            data[lo:hi],
            pdata[lo:hi],
            gram_of(r),
            base_of(r, cols),
            lam,
            None if extra_rhs is None else extra_rhs[r],
        )
        if not b.any():
            return
        try:
            out[r] = spd_solve(a, b)
        except SolverError as exc:
            raise exc.with_context(**{label: r})

    map_rows(solve, n_rows, threads)
    return out


def user_system(v, q: ConfidenceWeights, p: PreferenceMatrix, lam: float, w: int, gram=None):
    """``(V^T Q^w V + lam I, V^T Q^w p_w)`` via the shared ``V^T V``."""
    gram = v.T @ v if gram is None else gram
    lo, hi = q.csr.indptr[w], q.csr.indptr[w + 1]
    return row_system(v, q.csr.indices[lo:hi], q.csr.data[lo:hi], p.csr.data[lo:hi], gram, 1.0, lam)


def task_system(u, q: ConfidenceWeights, p: PreferenceMatrix, s, v_prev, lam: float, i: int, gram=None):
    """Linear system solved for task ``i``, including the similarity pull."""
    gram = u.T @ u if gram is None else gram
    pt = _transpose(p)
    lo, hi = q.csr_t.indptr[i], q.csr_t.indptr[i + 1]
    pull = 0.5 * lam * similarity_pull(s, v_prev)[i]
    return row_system(
        u, q.csr_t.indices[lo:hi], q.csr_t.data[lo:hi], pt.data[lo:hi], gram, 1.0, lam, pull
    )


def update_user_factors(
    v: np.ndarray,
    q: ConfidenceWeights,
    p: PreferenceMatrix,
    lam: float,
    *,
    threads: int = 1,
) -> np.ndarray:
    """Closed-form worker factors for fixed task factors.

    ``V^T Q^w V`` is assembled as ``V^T V + V_+^T (Q_+ - I) V_+``; ``V^T V``
    is computed once for all workers.
    """
    gram = v.T @ v
    return _solve_rows(
        v, q.csr, p.csr, lam, lambda r: gram, lambda r, cols: 1.0, None, threads, "worker"
    )


def similarity_pull(s, v_prev: np.ndarray) -> np.ndarray:
    """``sum_{i' != i} S[i, i'] v_prev[i']`` for every task ``i``."""
    s_off = s.off_diagonal() if isinstance(s, SimilarityMatrix) else _zero_diag(s)
    return s_off @ v_prev


def _zero_diag(s) -> np.ndarray:
    s = np.array(s, dtype=np.float64)
    np.fill_diagonal(s, 0.0)
    return s


def update_task_factors(
    u: np.ndarray,
    q: ConfidenceWeights,
    p: PreferenceMatrix,
    s,
    v_prev: np.ndarray,
    lam: float,
    *,
    threads: int = 1,
) -> np.ndarray:
    """Task factors for fixed worker factors, pulled toward similar tasks.

    ``v_i = (U^T Q^i U + lam I)^{-1} (U^T Q^i p_i + 0.5 lam sum_{i' != i}
    S[i, i'] v_prev[i'])``.  The similarity sum always reads ``v_prev``, so
    rows can be solved in any order.
    """
    if v_prev.shape != (q.shape[1], u.shape[1]):
        raise ValueError(f"v_prev has shape {v_prev.shape}, expected {(q.shape[1], u.shape[1])}")
    gram = u.T @ u
    pull = 0.5 * lam * similarity_pull(s, v_prev)
    return _solve_rows(
        u,
        q.csr_t,
        _transpose(p),
        lam,
        lambda r: gram,
        lambda r, cols: 1.0,
        pull,
        threads,
        "task",
    )


def _transpose(p: PreferenceMatrix):
    t = p.csr.T.tocsr()
    t.sort_indices()
    return t


def objective_ifts(u, v, q: ConfidenceWeights, p: PreferenceMatrix, s, lam: float) -> float:
    """Weighted squared loss plus ridge, minus the similarity reward.

    The similarity sum runs over ordered pairs ``i != i'``.
    """
    scores = u @ v.T
    qd = q.to_dense()
    pd = p.to_dense()
    loss = float(np.sum(qd * (pd - scores) ** 2))
    values = s.values if isinstance(s, SimilarityMatrix) else np.asarray(s)
    s_off = _zero_diag(values)
    reward = float(np.sum(s_off * (v @ v.T)))
    return loss + lam * (float(np.sum(u * u)) + float(np.sum(v * v)) - reward)


def run_sweeps(
    sweep: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]],
    objective: Callable[[np.ndarray, np.ndarray], float],
    u: np.ndarray,
    v: np.ndarray,
    iterations: int,
    early_stop: float | None,
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Alternate ``sweep`` and record the objective after each one."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    trace: list[float] = []
    for it in range(iterations):
        try:
            u, v = sweep(u, v)
        except SolverError as exc:
            raise exc.with_context(sweep=it)
        trace.append(objective(u, v))
        if len(trace) >= 3 and trace[-1] > trace[-2] > trace[-3]:
            _logger.warning(
                "objective increased on two consecutive sweeps (sweep %d: %.6g)", it, trace[-1]
            )
        if early_stop is not None and len(trace) >= 2:
            prev = trace[-2]
            if abs(prev - trace[-1]) <= early_stop * max(abs(prev), 1e-300):
                break
    return u, v, trace


def fit_ifts(
    c: InteractionMatrix,
    y: TaskFeatureMatrix | None,
    n_factors: int = 20,
    alpha: float = 50.0,
    lam: float = 0.01,
    iterations: int = 15,
    seed: int = 42,
    *,
    similarity=None,
    early_stop: float | None = None,
    threads: int = 1,
) -> LatentModel:
    """Fit IFTS by alternating worker and task updates.

    ``U`` starts from ``init_factors(..., seed)`` and ``V`` from
    ``seed + 1``.  ``similarity`` overrides the matrix derived from ``y``
    (pass :meth:`SimilarityMatrix.disabled` to drop the penalty).
    ``early_stop``, when set, ends training once the relative objective
    change drops below it.
    """
    if similarity is None:
        if y is None:
            raise ValueError("task features are required unless similarity is given")
        if y.n_tasks != c.n_tasks:
            raise ValueError(f"interactions cover {c.n_tasks} tasks, features cover {y.n_tasks}")
        similarity = task_similarity_matrix(y)
    q = build_confidence(c, alpha)
    p = build_preference(c)
    u0 = init_factors(c.n_workers, n_factors, seed)
    v0 = init_factors(c.n_tasks, n_factors, seed + 1)

    def sweep(u, v):
        u = update_user_factors(v, q, p, lam, threads=threads)
        v = update_task_factors(u, q, p, similarity, v, lam, threads=threads)
        return u, v

    u, v, trace = run_sweeps(
        sweep, lambda u, v: objective_ifts(u, v, q, p, similarity, lam), u0, v0, iterations, early_stop
    )
    return LatentModel(
        u=u,
        v=v,
        alpha=float(alpha),
        lam=float(lam),
        iterations=int(iterations),
        seed=int(seed),
        objective_trace=trace,
        kind="ifts",
    )


def predict_latent(model: LatentModel) -> np.ndarray:
    """Scores ``u_w . v_i`` for every worker/task pair."""
    return model.u @ model.v.T
