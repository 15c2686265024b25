"""Index-ordered worker mapping: identical results at any thread count."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def resolve_threads(threads: int) -> int:
    """0 (or negative) means 'use the available cores'."""
    if threads and threads > 0:
        return int(threads)
    return os.cpu_count() or 1


def parallel_map(fn, count: int, threads: int = 1) -> list:
    """Evaluate ``fn(i)`` for i in range(count), collecting results by index.

    Results are written into a preallocated slot per index, so the output
    does not depend on completion order or on ``threads``.
    """
    results = [None] * count
    threads = resolve_threads(threads)
    if threads <= 1 or count <= 1:
        for i in range(count):
            results[i] = fn(i)
        return results
    with ThreadPoolExecutor(max_workers=min(threads, count)) as pool:
        for i, value in zip(range(count), pool.map(fn, range(count))):
            results[i] = value
    return results
