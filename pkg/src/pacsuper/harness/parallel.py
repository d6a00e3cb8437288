"""Chunked trial execution with a deterministic, worker-count-free reduction order."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable


def chunks(n: int, size: int) -> list[tuple[int, int]]:
    return [(start, min(size, n - start)) for start in range(0, n, size)]


def map_chunks(fn: Callable, n: int, workers: int = 1, chunk_size: int = 250) -> list:
    """Call ``fn(first, count)`` over consecutive chunks of range(n) and concatenate.

    ``fn`` must be picklable when workers > 1. Each trial draws from its own
    counter-derived stream, so results do not depend on how chunks are spread.
    """
    parts = chunks(n, chunk_size)
    if workers <= 1 or len(parts) == 1:
        results = [fn(first, count) for first, count in parts]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, [p[0] for p in parts], [p[1] for p in parts]))
    out = []
    for r in results:
        out.extend(r)
    return out
