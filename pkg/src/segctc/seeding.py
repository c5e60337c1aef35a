"""Deterministic RNG derivation from structured integer keys."""

from __future__ import annotations

import numpy as np


def seeded_rng(*keys: int) -> np.random.Generator:
    """Generator keyed by a tuple of non-negative integers.

    The same keys always yield the same stream; distinct keys yield
    independent streams. Used so that every sampled quantity (corpus
    utterance, batch, mask) is reproducible in isolation.
    """
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))
