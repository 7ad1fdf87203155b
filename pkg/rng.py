"""Seeded random streams.

All randomness goes through make_rng. A run has one integer seed; independent
pieces of work (replicate i, backtest refit block k) get their own stream by
passing a spawn key, so results do not depend on execution order or on how
many workers share the load.
"""

import numpy as np


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator for ``seed`` on the sub-stream named by ``stream``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(seq))
