"""Counter-based random substreams.

Trial ``i`` under seed ``k`` owns the four 64-bit words Philox4x64 produces
at counter ``i`` with key ``k``.  Any chunking of the trial range therefore
sees the same numbers, which is what lets chunked or threaded runs reduce to
the serial result.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

WORDS_PER_TRIAL = 4
_SEED_LIMIT = 2**64


def check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    if not 0 <= int(seed) < _SEED_LIMIT:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    return int(seed)


def trial_words(seed: int, start: int, count: int) -> np.ndarray:
    """Words for trials ``start .. start+count-1`` as a (count, 4) uint64 array."""
    seed = check_seed(seed)
    if start < 0 or count < 0:
        raise ValueError("start and count must be nonnegative")
    raw = Philox(key=seed, counter=start).random_raw(WORDS_PER_TRIAL * count)
    return raw.reshape(count, WORDS_PER_TRIAL)


def to_unit(words: np.ndarray) -> np.ndarray:
    """Map uint64 words to doubles in [0, 1) using the top 53 bits."""
    return (words >> np.uint64(11)).astype(np.float64) * 2.0**-53


def to_open_unit(words: np.ndarray) -> np.ndarray:
    """Strictly inside (0, 1): midpoints of a 2**-52 grid, so the top value
    stays below 1 after rounding."""
    return ((words >> np.uint64(12)).astype(np.float64) + 0.5) * 2.0**-52


def to_normal(words: np.ndarray) -> np.ndarray:
    return ndtri(to_open_unit(words))


def chunk_bounds(total: int, chunk: int):
    for start in range(0, total, chunk):
        yield start, min(chunk, total - start)
