"""Seeded random streams.

Every stochastic component draws from a Generator built from a (seed, stream)
pair, so a trial is reproducible from its seed and components with different
stream ids never share draws.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator for a (seed, stream) pair; same pair, same sequence."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, stream))))
