"""Deterministic seed derivation and RNG construction.

Every stochastic operation in the pipeline is a pure function of its
inputs and a 64-bit seed.  Stage seeds are derived from a master seed by
hashing the stage coordinates, so distinct (stage, entity, method)
tuples get independent streams and any run can be replayed exactly.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(master: int, *parts: object) -> int:
    """Stable 64-bit seed from a master seed and a tuple of labels."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master) & _MASK64).encode())
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest(), "big")


def rng(seed: int, *parts: object) -> np.random.Generator:
    """PCG64 generator for the given seed, optionally split by labels."""
    if parts:
        seed = derive_seed(seed, *parts)
    return np.random.default_rng(int(seed) & _MASK64)
