"""Deterministic chunked execution.

Work is split into fixed-size chunks whose boundaries never depend on the
number of workers, and partial results are combined by a fixed pairwise tree.
Together this makes every reduction bit-identical for any thread count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

CHUNK_ROWS = 16384
THREADS_ENV = "SUPERGAUSS_THREADS"


def default_threads() -> int:
    value = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def chunk_bounds(total: int, chunk: int = CHUNK_ROWS) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]


def map_chunks(func: Callable[[int, int, int], T], total: int, threads: int | None = None,
               chunk: int = CHUNK_ROWS) -> list[T]:
    """Apply ``func(index, lo, hi)`` to each chunk; results come back in chunk order."""
    bounds = chunk_bounds(total, chunk)
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(bounds) <= 1:
        return [func(i, lo, hi) for i, (lo, hi) in enumerate(bounds)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(func, i, lo, hi) for i, (lo, hi) in enumerate(bounds)]
        return [f.result() for f in futures]


def tree_sum(parts: Sequence[T]) -> T:
    """Pairwise reduction with a shape fixed by ``len(parts)`` alone."""
    if not parts:
        raise ValueError("nothing to reduce")
    level = list(parts)
    while len(level) > 1:
        nxt = [level[i] + level[i + 1] for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]
