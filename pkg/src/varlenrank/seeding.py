"""Deterministic RNG stream derivation.

Every random draw in the package flows through a numpy Generator seeded
with a flat entropy list built here, so identical (seed, derivation
indices) always reproduce identical results regardless of how the work
is chunked or distributed.
"""
from __future__ import annotations

import zlib

import numpy as np


def derive_seed(seed, *extra) -> list[int]:
    """Flatten a seed plus derivation indices into SeedSequence entropy."""
    base = list(map(int, seed)) if isinstance(seed, (tuple, list)) else [int(seed)]
    return base + [int(x) for x in extra]


def rng_for(seed, *extra) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *extra))


def stable_qid_key(qid: str) -> int:
    """Integer derivation key for a query id (numeric ids pass through)."""
    try:
        return int(qid)
    except ValueError:
        return zlib.crc32(qid.encode())
