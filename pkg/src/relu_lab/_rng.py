"""Counter-based random streams keyed by (seed, purpose...).

Every consumer asks for its own substream, so e.g. the half-normal draws of a
lift never share state with label noise or learner restarts.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("substream keys must be non-negative")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def substream(seed: int, *purpose) -> np.random.Generator:
    """Philox generator for ``seed`` and a purpose path such as ``("lift",)``
    or ``("learner", j)``. Identical arguments give bit-identical streams."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(p) for p in purpose))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *purpose) -> int:
    """A 63-bit integer seed derived from ``seed`` and a purpose path."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(p) for p in purpose))
    lo, hi = (int(v) for v in ss.generate_state(2, dtype=np.uint32))
    return (lo | (hi << 32)) >> 1
