"""Seeded random streams.

Every replica draws from its own Philox-4x64 generator (counter based),
keyed by ``SeedSequence([seed, replica, stream])``.  Replicas are therefore
reproducible individually and independent of execution order.  The generator
choice is part of the reproducibility contract of a release; changing it
changes every data row.
"""
from __future__ import annotations

import numpy as np

# stream tags keep independent consumers of one replica apart
WALK = 0
GAMMA = 1
GFF = 2
AUX = 3


def replica_rng(seed: int, replica: int = 0, stream: int = WALK) -> np.random.Generator:
    if seed < 0 or replica < 0 or stream < 0:
        raise ValueError("seed, replica and stream must be nonnegative")
    ss = np.random.SeedSequence([int(seed), int(replica), int(stream)])
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    return replica_rng(int(rng))
