"""Independent seeded replicas, optionally spread over threads.

Each replica gets its own PCG64 stream spawned from one SeedSequence, so
results depend only on (seed, replica index) and not on scheduling. The jitted
kernels release the GIL, which is what makes threads useful here.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar

import numpy as np

WORKERS_ENV = "CURRES_WORKERS"

T = TypeVar("T")


def worker_count(default: Optional[int] = None) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
        return max(n, 1)
    return default or 1


def spawn_generators(seed: int, n: int) -> List[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def run_replicas(fn: Callable[[int, np.random.Generator], T], n: int, seed: int = 0,
                 workers: Optional[int] = None) -> List[T]:
    """``[fn(i, rng_i) for i in range(n)]``, possibly on a thread pool; order is kept."""
    rngs = spawn_generators(seed, n)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or n <= 1:
        return [fn(i, r) for i, r in enumerate(rngs)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n), rngs))
