# data/random_streams.py

import zlib
import numpy as np


def _key_part(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def stream(seed, *key):
    """
    Counter-based generator for one (seed, key) cell.

    The same seed and key always give the same stream, independent of how
    work is split across workers.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_part(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def as_generator(rng_or_seed, *key):
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed
    return stream(0 if rng_or_seed is None else rng_or_seed, *key)
