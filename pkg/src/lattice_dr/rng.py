"""Seedable, splittable random streams.

Every random draw in the package comes from ``split(seed, *keys)``: the keys
name the operation and the item (sample, trial, iteration), so results do
not depend on call order or thread scheduling.
"""

from __future__ import annotations

import numpy as np

# operation keys
MC_EVAL = 1
MC_GRADIENT = 2
GREEDY_STEP = 3
ROUND_TRIAL = 4
GENERATOR = 5
TEST = 6


def split(seed: int, *keys: int) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
