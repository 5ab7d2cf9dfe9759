"""Reproducible random streams.

Every replica draws from its own Philox (counter-based) generator, keyed by
``(seed, *key)`` through ``SeedSequence`` spawn keys. Results therefore do
not depend on execution order or on how replicas are spread over workers.
"""

import zlib

import numpy as np

RandomStream = np.random.Generator


def _key(k) -> int:
    # string labels map to a fixed 32-bit word, independent of PYTHONHASHSEED
    return zlib.crc32(k.encode()) if isinstance(k, str) else int(k)


def make_stream(seed: int, *key: int | str) -> RandomStream:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def split(rng: RandomStream, n: int) -> list[RandomStream]:
    """Independent child streams of ``rng`` (Philox jump-ahead)."""
    return list(rng.spawn(n))
