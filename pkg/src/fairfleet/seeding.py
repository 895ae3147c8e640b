"""Deterministic RNG stream derivation.

Every stochastic component draws from its own named stream so that runs are
reproducible bit for bit and adding a consumer never shifts another one.
"""

from __future__ import annotations

import numpy as np

# Fixed stream indices. Order is part of the reproducibility contract;
# append new entries, never reorder.
STREAM_POLICY_INIT_LOW = 0
STREAM_POLICY_INIT_HIGH = 1
STREAM_ACTION = 2
STREAM_SHUFFLE = 3
STREAM_ENV_BASE = 4


def spawn_seed(seed: int, *key: int) -> int:
    """Derive a child seed from a root seed and an integer key path."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stream_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by ``key`` under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))
