"""
Reproducible random streams for path simulation.

Paths are grouped in fixed-size blocks. Block ``b`` draws from a Philox
counter-based generator keyed by ``SeedSequence([seed, b])`` and always
draws the full block, so path ``p`` is the same for every ``n_paths > p``
and for every worker schedule.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Tuple

import numpy as np

from ..core.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

BLOCK_SIZE = 4096
MAX_SEED = 2**64 - 1


def check_seed(seed: int) -> int:
    """Validate a user seed and return it as a Python int."""
    if isinstance(seed, bool) or int(seed) != seed:
        raise ConfigurationError(f"seed must be an integer, got {seed!r}", key="mc.seed")
    seed = int(seed)
    if not (0 <= seed <= MAX_SEED):
        raise ConfigurationError("seed must be a 64-bit unsigned integer", key="mc.seed")
    return seed


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Return the Philox generator owning path block ``block``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def path_block_index(path: int) -> Tuple[int, int]:
    """Map a global path index to (block, row within the block)."""
    return divmod(path, BLOCK_SIZE)


def _draw_block(
    seed: int, block: int, n_steps: int, dt: float, intensity: float
) -> Tuple[np.ndarray, np.ndarray]:
    rng = block_generator(seed, block)
    dW = rng.standard_normal((BLOCK_SIZE, n_steps)) * np.sqrt(dt)
    dN = rng.poisson(intensity * dt, size=(BLOCK_SIZE, n_steps)).astype(np.int64)
    return dW, dN


def draw_increments(
    seed: int,
    n_paths: int,
    n_steps: int,
    dt: float,
    intensity: float,
    threads: int = 1,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw Brownian and Poisson increments for ``n_paths`` paths.

    Args:
        seed: Master seed
        n_paths: Number of paths
        n_steps: Number of grid steps
        dt: Step size
        intensity: Poisson intensity (jumps per unit time)
        threads: Worker threads; does not affect the result

    Returns:
        Tuple (dW, dN) of shape (n_paths, n_steps), dN as int64
    """
    seed = check_seed(seed)
    n_blocks = -(-n_paths // BLOCK_SIZE)
    blocks = range(n_blocks)

    def work(block: int) -> Tuple[np.ndarray, np.ndarray]:
        return _draw_block(seed, block, n_steps, dt, intensity)

    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            # map preserves block order, so concatenation is schedule independent
            results: List[Tuple[np.ndarray, np.ndarray]] = list(pool.map(work, blocks))
    else:
        results = [work(block) for block in blocks]

    dW = np.concatenate([r[0] for r in results], axis=0)[:n_paths]
    dN = np.concatenate([r[1] for r in results], axis=0)[:n_paths]
    logger.debug(f"Drew {n_blocks} block(s) of increments for {n_paths} paths")
    return dW, dN
