"""Reproducible per-draw random streams.

Every Monte Carlo draw gets its own generator, keyed on the master seed and
the draw index, so results do not depend on how draws are scheduled.
"""

import numpy as np


def stream(seed, *key):
    """Generator for the sub-stream ``key`` of master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(seed, *key):
    """Derive an integer seed for the sub-stream ``key``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])
