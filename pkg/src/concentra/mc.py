"""Reproducible block-parallel Monte Carlo.

Trials are split into fixed-size blocks; block b draws from a Philox generator
keyed by (seed, b). Results are concatenated in block order, so the output does
not depend on how many workers ran the blocks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK_SIZE = 4096


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), block]))


def run_blocks(fn, trials: int, seed: int, workers: int = 1, block_size: int = BLOCK_SIZE) -> np.ndarray:
    """Concatenate ``fn(rng, size)`` over all blocks covering ``trials`` draws."""
    if trials < 1:
        raise ValueError("trials must be positive")
    sizes = [min(block_size, trials - s) for s in range(0, trials, block_size)]

    def job(b):
        return np.asarray(fn(block_rng(seed, b), sizes[b]))

    if workers <= 1:
        parts = [job(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    return np.concatenate(parts)
