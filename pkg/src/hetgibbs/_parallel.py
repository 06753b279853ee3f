"""Optional process-level parallelism for chains, folds and replicates.

Concurrency is opt-in: the HETGIBBS_THREADS environment variable caps the
number of worker processes (default 1, i.e. serial).  Every job carries its
own seed, so results are identical whether or not a pool is used.
"""

from __future__ import annotations

import multiprocessing
import os

__all__ = ["thread_cap", "parallel_map"]


def thread_cap() -> int:
    raw = os.environ.get("HETGIBBS_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"HETGIBBS_THREADS must be an integer, got {raw!r}")
    return max(cap, 1)


def parallel_map(fn, jobs: list) -> list:
    """Map ``fn`` over picklable jobs, preserving order."""
    workers = min(thread_cap(), len(jobs))
    if workers <= 1 or len(jobs) <= 1 or multiprocessing.current_process().daemon:
        return [fn(j) for j in jobs]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(processes=workers) as pool:
        return pool.map(fn, jobs)
