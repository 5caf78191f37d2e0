"""Dense linear-algebra kernels: SPD solve and non-negative least squares."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack


class SolverError(RuntimeError):
    """Base class for numerical solver failures.

    ``context`` accumulates where the failure happened (row index, sweep,
    ...) as the error propagates up through the model fitters.
    """

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.base_message = message
        self.context: dict = dict(context)

    def with_context(self, **context) -> "SolverError":
        self.context.update(context)
        detail = ", ".join(f"{k}={v}" for k, v in self.context.items())
        self.args = (f"{self.base_message} ({detail})",)
        return self


class NotPositiveDefiniteError(SolverError):
    def __init__(self, pivot: int):
        super().__init__(f"matrix is not positive definite at pivot {pivot}")
        self.pivot = pivot


class NnlsConvergenceError(SolverError):
    def __init__(self, iterations: int, best: "NnlsResult"):
        super().__init__(f"NNLS did not converge in {iterations} iterations")
        self.best = best


def spd_solve(a, b, *, symmetry_rtol: float = 1e-9) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive definite ``a``.

    Uses a Cholesky factorization (LAPACK ``potrf``/``potrs``); no inverse is
    formed.  ``a`` is symmetrized as ``(a + a.T) / 2`` first, which absorbs
    rounding asymmetry from assembling ``M.T @ W @ M``.

    ``b`` may be a vector or an ``(n, k)`` block of right-hand sides.

    Raises
    ------
    NotPositiveDefiniteError
        If the factorization meets a non-positive pivot; ``pivot`` is the
        zero-based index of the failing leading minor.
    ValueError
        If ``a`` is not square, or is asymmetric beyond ``symmetry_rtol``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, matrix has {a.shape[0]}")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if np.abs(a - a.T).max(initial=0.0) > symmetry_rtol * scale:
        raise ValueError("matrix is not symmetric")
    sym = 0.5 * (a + a.T)
    chol, info = lapack.dpotrf(sym, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(int(info) - 1)
    if info < 0:  # pragma: no cover - argument error inside LAPACK
        raise ValueError(f"potrf argument {-info} invalid")
    x, info = lapack.dpotrs(chol, b, lower=1)
    if info != 0:  # pragma: no cover
        raise ValueError(f"potrs argument {-info} invalid")
    return x


@dataclass
class NnlsResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    active_set_size: int
    gradient: np.ndarray = field(repr=False, default=None)


def _result(a, b, x, iterations) -> NnlsResult:
    resid = a @ x - b
    return NnlsResult(
        x=x,
        residual_norm=float(np.linalg.norm(resid)),
        iterations=iterations,
        active_set_size=int(np.count_nonzero(x == 0.0)),
        gradient=a.T @ resid,
    )


def nnls(a, b, tol: float | None = None, max_iter: int | None = None) -> NnlsResult:
    """Minimize ``||a @ x - b||^2`` subject to ``x >= 0``.

    Lawson-Hanson active-set method.  Variables move from the active
    (clamped at zero) set to the passive set one at a time, in order of
    largest negative gradient; whenever the passive least-squares solution
    leaves the orthant the iterate is moved back along the segment to the
    first boundary crossing.

    Parameters
    ----------
    a : array_like, shape (m, n)
    b : array_like, shape (m,)
    tol : float, optional
        Dual feasibility tolerance.  Defaults to ``1e-10 * (1 + max|b|)``.
    max_iter : int, optional
        Cap on main-loop iterations (defaults to ``3 * n``).

    Returns
    -------
    NnlsResult
        ``active_set_size`` counts the components clamped at zero.

    Raises
    ------
    NnlsConvergenceError
        When ``max_iter`` is exhausted; the exception's ``best`` attribute
        holds the last feasible iterate.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty matrix, got shape {a.shape}")
    m, n = a.shape
    if b.shape != (m,):
        raise ValueError(f"b must have shape ({m},), got {b.shape}")
    if tol is None:
        tol = 1e-10 * (1.0 + float(np.abs(b).max()))
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = 3 * n

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    # w is the negative gradient; positive entries are descent directions.
    w = a.T @ (b - a @ x)
    rejected = np.zeros(n, dtype=bool)
    iterations = 0

    while True:
        candidates = ~passive & ~rejected
        if not candidates.any():
            break
        j = int(np.argmax(np.where(candidates, w, -np.inf)))
        if w[j] <= tol:
            break
        iterations += 1
        if iterations > max_iter:
            raise NnlsConvergenceError(max_iter, _result(a, b, x, max_iter))

        passive[j] = True
        z = _passive_lstsq(a, b, passive)
        if z[j] <= 0:
            # The new column is numerically dependent on the passive ones.
            passive[j] = False
            rejected[j] = True
            continue

        while (z[passive] <= 0).any():
            blocking = passive & (z <= 0)
            step = np.min(x[blocking] / (x[blocking] - z[blocking]))
            x = x + step * (z - x)
            # Variables that hit zero (or slightly overshoot) leave the passive set.
            passive &= x > 10 * np.finfo(float).eps * max(1.0, np.abs(x).max())
            x[~passive] = 0.0
            z = _passive_lstsq(a, b, passive)

        x = z
        w = a.T @ (b - a @ x)
        rejected[:] = False

    return _result(a, b, x, iterations)


def _passive_lstsq(a, b, passive) -> np.ndarray:
    z = np.zeros(a.shape[1])
    if passive.any():
        sol, *_ = np.linalg.lstsq(a[:, passive], b, rcond=None)
        z[passive] = sol
    return z
