"""Deterministic per-object random streams.

Streams are derived by hashing ``(seed, *tags)`` so that independent
computations (per cube, per draw, per operation) get reproducible,
non-overlapping generators regardless of evaluation order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(seed: int, *tags) -> np.random.Generator:
    """Return a Generator keyed on ``seed`` and a tuple of hashable tags."""
    digest = hashlib.sha256(repr((int(seed),) + tags).encode()).digest()
    entropy = int.from_bytes(digest[:32], "little")
    return np.random.default_rng(np.random.SeedSequence(entropy))
