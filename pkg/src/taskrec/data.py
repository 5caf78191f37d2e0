"""Matrix types for workers, tasks and task features.

Notation follows the usual implicit-feedback setup: ``C`` holds completion
counts, ``P`` is its binarized support, ``Q`` the confidence weights
``1 + alpha * c`` and ``Y`` the binary task-feature matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class InteractionMatrix:
    """Sparse worker x task completion counts.

    Only positive counts are stored.  Duplicate ``(worker, task)`` records
    passed to :meth:`from_triples` are summed.
    """

    def __init__(self, csr: sp.csr_matrix):
        csr = sp.csr_matrix(csr, dtype=np.int64, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        if csr.nnz and csr.data.min() < 1:
            raise ValueError("interaction counts must be positive")
        for arr in (csr.data, csr.indices, csr.indptr):
            _freeze(arr)
        self._csr = csr

    @classmethod
    def from_triples(
        cls,
        workers: Sequence[int],
        tasks: Sequence[int],
        counts: Sequence[int],
        shape: tuple[int, int],
    ) -> "InteractionMatrix":
        workers = np.asarray(workers, dtype=np.int64)
        tasks = np.asarray(tasks, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        n_w, n_t = shape
        if workers.size and (
            workers.min() < 0 or workers.max() >= n_w or tasks.min() < 0 or tasks.max() >= n_t
        ):
            raise ValueError("interaction index out of range")
        if counts.size and counts.min() < 1:
            raise ValueError("interaction counts must be positive")
        coo = sp.coo_matrix((counts, (workers, tasks)), shape=shape, dtype=np.int64)
        return cls(coo.tocsr())

    @classmethod
    def from_dense(cls, dense) -> "InteractionMatrix":
        dense = np.asarray(dense)
        if dense.size and dense.min() < 0:
            raise ValueError("interaction counts must be non-negative")
        return cls(sp.csr_matrix(dense.astype(np.int64)))

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape

    @property
    def n_workers(self) -> int:
        return self._csr.shape[0]

    @property
    def n_tasks(self) -> int:
        return self._csr.shape[1]

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    def row(self, w: int) -> tuple[np.ndarray, np.ndarray]:
        """Task indices and counts of worker ``w``'s completions."""
        lo, hi = self._csr.indptr[w], self._csr.indptr[w + 1]
        return self._csr.indices[lo:hi], self._csr.data[lo:hi]

    def entries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(workers, tasks, counts)`` sorted by worker then task."""
        coo = self._csr.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.astype(np.int64)

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def transpose_csr(self) -> sp.csr_matrix:
        """Task x worker view, used for per-task updates."""
        t = self._csr.T.tocsr()
        t.sort_indices()
        return t

    def task_totals(self) -> np.ndarray:
        """Total completions of each task across all workers."""
        return np.asarray(self._csr.sum(axis=0)).ravel().astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, InteractionMatrix) or self.shape != other.shape:
            return NotImplemented if not isinstance(other, InteractionMatrix) else False
        return (self._csr != other._csr).nnz == 0

    def __repr__(self):
        return f"InteractionMatrix(shape={self.shape}, nnz={self.nnz})"


class PreferenceMatrix:
    """Binary support of an :class:`InteractionMatrix` (``p = 1`` iff ``c >= 1``)."""

    def __init__(self, csr: sp.csr_matrix):
        csr = sp.csr_matrix(csr, dtype=np.float64, copy=True)
        csr.sort_indices()
        csr.data[:] = 1.0
        for arr in (csr.data, csr.indices, csr.indptr):
            _freeze(arr)
        self._csr = csr

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape

    def __getitem__(self, key: tuple[int, int]) -> int:
        w, i = key
        return int(self._csr[w, i])

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()


class ConfidenceWeights:
    """Confidence ``q = 1 + alpha * c``, stored lazily.

    Only the positive entries are held explicitly; every unobserved pair
    has weight exactly 1.
    """

    def __init__(self, counts: InteractionMatrix, alpha: float):
        alpha = float(alpha)
        if not alpha >= 0:
            raise ValueError(f"alpha must be non-negative, got {alpha}")
        self.alpha = alpha
        self.counts = counts
        csr = sp.csr_matrix(counts.csr, dtype=np.float64, copy=True)
        csr.data[:] = 1.0 + alpha * counts.csr.data
        _freeze(csr.data)
        self._csr = csr
        self._csr_t: sp.csr_matrix | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape

    @property
    def csr(self) -> sp.csr_matrix:
        """Explicit weights of the positive entries (worker-major)."""
        return self._csr

    @property
    def csr_t(self) -> sp.csr_matrix:
        """Explicit weights of the positive entries (task-major)."""
        if self._csr_t is None:
            t = self._csr.T.tocsr()
            t.sort_indices()
            self._csr_t = t
        return self._csr_t

    def __getitem__(self, key: tuple[int, int]) -> float:
        w, i = key
        c = self.counts.csr[w, i]
        return 1.0 + self.alpha * c if c else 1.0

    def to_dense(self) -> np.ndarray:
        dense = np.ones(self.shape)
        coo = self._csr.tocoo()
        dense[coo.row, coo.col] = coo.data
        return dense


class TaskFeatureMatrix:
    """Binary task x feature matrix ``Y``.

    Each task row is a sorted tuple of the features it carries.
    """

    def __init__(self, rows: Iterable[Iterable[int]], n_features: int):
        canon = []
        for row in rows:
            feats = sorted(set(int(f) for f in row))
            if feats and (feats[0] < 0 or feats[-1] >= n_features):
                raise ValueError("feature index out of range")
            canon.append(tuple(feats))
        self.rows: tuple[tuple[int, ...], ...] = tuple(canon)
        self.n_features = int(n_features)
        indptr = np.zeros(len(canon) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(r) for r in canon])
        indices = np.fromiter((f for r in canon for f in r), dtype=np.int64, count=int(indptr[-1]))
        csr = sp.csr_matrix(
            (np.ones(indices.size), indices, indptr), shape=(len(canon), self.n_features)
        )
        self._dense = _freeze(csr.toarray())
        self._csr = csr

    @classmethod
    def from_dense(cls, dense) -> "TaskFeatureMatrix":
        dense = np.asarray(dense)
        if not np.isin(dense, (0, 1)).all():
            raise ValueError("task features must be binary")
        return cls([np.flatnonzero(r) for r in dense], dense.shape[1])

    @property
    def n_tasks(self) -> int:
        return len(self.rows)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_tasks, self.n_features)

    @property
    def dense(self) -> np.ndarray:
        """Read-only dense 0/1 float matrix."""
        return self._dense

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    def __eq__(self, other):
        if not isinstance(other, TaskFeatureMatrix):
            return NotImplemented
        return self.rows == other.rows and self.n_features == other.n_features


@dataclass(frozen=True)
class SimilarityMatrix:
    """Dense symmetric task x task similarity.

    Built from features by :func:`task_similarity_matrix`; :meth:`disabled`
    gives the all-zero matrix that switches the similarity penalty off.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("similarity matrix must be square")
        if not np.array_equal(v, v.T):
            raise ValueError("similarity matrix must be symmetric")
        object.__setattr__(self, "values", _freeze(v))

    @classmethod
    def disabled(cls, n_tasks: int) -> "SimilarityMatrix":
        return cls(np.zeros((n_tasks, n_tasks)))

    @property
    def n_tasks(self) -> int:
        return self.values.shape[0]

    def off_diagonal(self) -> np.ndarray:
        """Copy of the values with the diagonal zeroed."""
        s = np.array(self.values)
        np.fill_diagonal(s, 0.0)
        return s


def build_preference(c: InteractionMatrix) -> PreferenceMatrix:
    return PreferenceMatrix(c.csr)


def build_confidence(c: InteractionMatrix, alpha: float) -> ConfidenceWeights:
    return ConfidenceWeights(c, alpha)


def task_similarity_matrix(y: TaskFeatureMatrix) -> SimilarityMatrix:
    """Logistic of the feature overlap, ``1 / (1 + exp(-Y_i . Y_j))``.

    The overlap counts are integers, so each unordered pair is evaluated
    once from an exactly symmetric Gram matrix.
    """
    ycsr = y.csr
    overlap = (ycsr @ ycsr.T).toarray()
    overlap = np.rint(overlap)
    s = 1.0 / (1.0 + np.exp(-overlap))
    iu = np.triu_indices(y.n_tasks, 1)
    s.T[iu] = s[iu]
    return SimilarityMatrix(s)
