"""Per-path random streams for reproducible Monte Carlo.

Each path owns a Philox (counter-based) stream whose 128-bit key is
``seed | path_index << 64``.  A path's draws therefore depend only on
``(seed, path_index)``, never on how paths are batched or scheduled.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    if not 0 <= seed <= MASK64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    if not 0 <= path_index <= MASK64:
        raise ValueError("path index out of range")
    return np.random.Generator(np.random.Philox(key=seed | (path_index << 64)))
