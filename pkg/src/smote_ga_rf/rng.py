"""Seeded random substreams.

Every random decision in the package is drawn from a stream keyed by
``(seed, *keys)``, so results never depend on evaluation order or on how work
is spread over threads.
"""
import hashlib

import numpy as np


def _key_int(k):
    if isinstance(k, (bool, np.bool_)):
        return int(k)
    if isinstance(k, (int, np.integer)):
        if k < 0:
            raise ValueError("substream keys must be non-negative")
        return int(k)
    digest = hashlib.sha256(str(k).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def seed_sequence(seed, *keys):
    return np.random.SeedSequence(entropy=_key_int(seed), spawn_key=tuple(_key_int(k) for k in keys))


def substream(seed, *keys):
    """Independent ``numpy.random.Generator`` for ``(seed, *keys)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))


def derive_seed(seed, *keys):
    """A 63-bit integer seed derived from ``(seed, *keys)``."""
    state = seed_sequence(seed, *keys).generate_state(2, dtype=np.uint32)
    return (int(state[0]) | (int(state[1]) << 32)) & ((1 << 63) - 1)
