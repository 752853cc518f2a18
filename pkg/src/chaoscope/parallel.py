"""Replica-parallel map with deterministic output order."""

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "CHAOSCOPE_THREADS"


def default_threads():
    raw = os.environ.get(THREADS_ENV, "").strip()
    return max(int(raw), 1) if raw else 1


def map_replicas(fn, n, threads=None):
    """``[fn(0), ..., fn(n-1)]``; each replica owns its RNG stream so order of execution is irrelevant."""
    threads = threads or default_threads()
    if threads <= 1 or n <= 1:
        return [fn(r) for r in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))
