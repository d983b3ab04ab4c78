"""Worker-pool helper whose output never depends on the pool size.

Trials are pure functions of their arguments (each carries its own RNG
stream), so results are merged in submission order and parallelism can
only change wall-clock time, not bytes.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
import os


def default_jobs() -> int:
    return os.cpu_count() or 1


def _call(packed):
    fn, args = packed
    return fn(*args)


def map_in_order(fn, args_list, jobs: int = 1) -> list:
    """Apply ``fn`` to each argument tuple, preserving input order."""
    args_list = list(args_list)
    if jobs is None:
        jobs = default_jobs()
    if jobs <= 1 or len(args_list) <= 1:
        return [fn(*args) for args in args_list]
    jobs = min(jobs, len(args_list))
    chunk = max(1, len(args_list) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_call, [(fn, a) for a in args_list], chunksize=chunk))
