"""Row-parallel scheduling shared by the model fitters."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable


def map_rows(fn: Callable[[int], None], n_rows: int, threads: int = 1) -> None:
    """Call ``fn(row)`` for every row in ``range(n_rows)``.

    Rows are split into contiguous chunks, one per thread.  ``fn`` must write
    only to its own row, so the result does not depend on ``threads``.  The
    first failing chunk (in row order) determines the raised exception.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if threads == 1 or n_rows < 2:
        for r in range(n_rows):
            fn(r)
        return

    def run(lo, hi):
        for r in range(lo, hi):
            fn(r)

    n_chunks = min(threads, n_rows)
    bounds = [n_rows * k // n_chunks for k in range(n_chunks + 1)]
    with ThreadPoolExecutor(max_workers=n_chunks) as pool:
        futures = [pool.submit(run, bounds[k], bounds[k + 1]) for k in range(n_chunks)]
        for fut in futures:
            fut.result()
