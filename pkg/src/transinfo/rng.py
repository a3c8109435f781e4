"""Seeding contract for all Monte Carlo code.

Every path draws from its own counter-based stream keyed by
(master_seed, path_index), so estimates merge deterministically by path
index regardless of how the path loop is scheduled or batched.
"""

from __future__ import annotations

import numpy as np


def path_rng(master_seed: int, path_index: int) -> np.random.Generator:
    """Independent Philox stream for one sample path."""
    return np.random.Generator(
        np.random.Philox(key=np.array([master_seed, path_index], dtype=np.uint64))
    )
