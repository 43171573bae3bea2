"""Deterministic work partitioning.

The worker count (environment variable TORUSFLOW_WORKERS, default 1) only
controls how many threads execute path chunks; chunk boundaries are fixed
(PATH_CHUNK paths per chunk) and every reduction is a fixed pairwise tree
over chunk index order, so results are bit-identical at any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

WORKER_ENV = "TORUSFLOW_WORKERS"
PATH_CHUNK = 128

T = TypeVar("T")


def worker_count() -> int:
    raw = os.environ.get(WORKER_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def path_chunks(m: int, chunk: int = PATH_CHUNK) -> list[range]:
    return [range(lo, min(lo + chunk, m)) for lo in range(0, m, chunk)]


def run_chunked(fn: Callable[[range], T], chunks: Sequence[range], workers: int | None = None) -> list[T]:
    """Apply fn to each chunk; results returned in chunk order regardless of
    scheduling."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


def pairwise_sum(items: Sequence[np.ndarray]) -> np.ndarray:
    """Fixed pairwise summation tree over index order (bit-reproducible)."""
    if len(items) == 0:
        raise ValueError("pairwise_sum of an empty sequence")
    level = [np.asarray(x) for x in items]
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            nxt.append(level[i] + level[i + 1])
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]
