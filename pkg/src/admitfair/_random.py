import zlib

import numpy as np


def substream(seed: int, *names) -> np.random.Generator:
    """Independent generator for a named stream under one pipeline seed.

    ``substream(7, "forest", 3)`` always yields the same generator, no matter
    what other streams were drawn from first.
    """
    key = [int(seed) & 0xFFFFFFFF]
    for name in names:
        if isinstance(name, (int, np.integer)):
            key.append(int(name) & 0xFFFFFFFF)
        else:
            key.append(zlib.crc32(str(name).encode("utf-8")))
    return np.random.default_rng(np.random.SeedSequence(key))


def subseed(seed: int, *names) -> int:
    return int(substream(seed, *names).integers(0, 2**31 - 1))
