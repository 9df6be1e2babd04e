"""Keyed random streams: ``stream(seed, *keys)`` depends only on its
arguments, never on call order, so generation can run in any order or in
parallel."""
import zlib

import numpy as np


def key_of(name: str) -> int:
    return zlib.crc32(name.encode())


def stream(seed, *keys) -> np.random.Generator:
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def derive_seed(seed, *keys) -> int:
    """A 63-bit seed drawn from ``stream(seed, *keys)``."""
    return int(stream(seed, *keys).integers(0, 2**63))


def image_seed(seed, index) -> int:
    """Per-image seed for corruption, shared by every consumer of a test set."""
    return derive_seed(seed, key_of("image"), index)
