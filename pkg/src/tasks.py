"""
Seeded task pool for censuses and sweeps.

Each task gets its own numpy Generator seeded from the run seed and the task
index, so results do not depend on how many workers run them or in which
order they finish.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")

_GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def derive_seed(base_seed: int, index: int) -> int:
    """base XOR (index * golden-ratio constant), reduced to 64 bits."""
    return ((base_seed & _MASK) ^ ((index * _GOLDEN) & _MASK)) & _MASK


def task_rng(base_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(base_seed, index))


def run_tasks(
    fn: Callable[[int, np.random.Generator], T],
    count: int,
    base_seed: int,
    workers: int = 1,
) -> List[T]:
    """Evaluate fn(index, rng) for index in range(count); results in index order."""
    if count < 0:
        raise ValueError(f"task count must be non-negative, got {count}")
    if workers <= 1 or count <= 1:
        return [fn(index, task_rng(base_seed, index)) for index in range(count)]
    logger.debug(f"running {count} tasks on {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, index, task_rng(base_seed, index)) for index in range(count)]
        return [future.result() for future in futures]
