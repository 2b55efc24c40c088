"""Named, independent random sub-streams derived from one master seed.

Every random draw in the package goes through :func:`stream`, keyed by a
stream name (``"tree"``, ``"fold"``, ``"b0"``, ``"passive"``, ...) and optional
integer indices, so that e.g. tree 17 of a forest gets the same generator no
matter how many trees are trained, or in which order.
"""

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, name: str, *index: int) -> np.random.Generator:
    """Return the generator for sub-stream ``name[index...]`` of ``seed``."""
    key = zlib.crc32(name.encode("utf-8"))
    entropy = [int(seed) & _MASK64, key, *(int(i) for i in index)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def child_seed(seed: int, name: str, *index: int) -> int:
    """Derive a 64-bit integer seed for a named sub-stream."""
    return int(stream(seed, name, *index).integers(0, 2**63 - 1))
