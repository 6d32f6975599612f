"""Seed fan-out: every component draws from ``(seed, component tag)``."""

from __future__ import annotations

import zlib

import numpy as np

RNG_ALGORITHM = "numpy.random.PCG64"


def derive_seed(seed: int, tag: str) -> int:
    """A 63-bit seed for component ``tag``; independent of every other tag."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(tag.encode())])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def make_rng(seed: int, tag: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, tag)))
