"""Counter-based seed streams.

Every random draw in the package comes from ``stream(seed, *key)``, so the
numbers a task sees depend only on its key, never on evaluation order.
"""
import numpy as np


def stream(seed, *key):
    if seed is None:
        raise ValueError("a seed is required for stochastic evaluation")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
