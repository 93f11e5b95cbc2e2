"""Worker-pool plumbing.

Tasks are submitted in order and collected in order; with one worker the
pool is bypassed entirely.  Correctness never depends on the pool: every
task computes from explicit (seed, index) inputs.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        return os.cpu_count() or 1
    w = int(workers)
    if w < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return w


def run_tasks(fn, args_list, workers: int) -> list:
    """Apply ``fn(*args)`` to each tuple, returning results in input order."""
    workers = resolve_workers(workers)
    if workers == 1 or len(args_list) <= 1:
        return [fn(*args) for args in args_list]
    with ProcessPoolExecutor(max_workers=min(workers, len(args_list))) as pool:
        futures = [pool.submit(fn, *args) for args in args_list]
        return [f.result() for f in futures]
