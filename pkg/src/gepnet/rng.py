"""Counter-based random streams with per-purpose derivation.

Every consumer derives its own generator from (seed, purpose-tag, index), so
weight draws, data draws and test draws are mutually independent and
bit-reproducible across platforms and across batch orderings.
"""

from __future__ import annotations

import zlib

import numpy as np


def stream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Philox generator for the (seed, purpose, index) triple."""
    key = zlib.crc32(purpose.encode("utf-8"))
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=(key, int(index)))
    return np.random.Generator(np.random.Philox(ss))
