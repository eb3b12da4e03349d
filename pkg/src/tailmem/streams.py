"""Counter-based random substreams.

Every random quantity in a run is drawn from a Philox generator keyed by
``(seed, purpose, counters...)``. Keys are hashed into the ``spawn_key`` of a
``SeedSequence``, so a row's stream never depends on how many other rows were
generated before it, or in which process.
"""
import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _word(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    part = int(part)
    if part < 0:
        raise ValueError(f"stream key components must be non-negative, got {part}")
    return part


def substream(seed, *key):
    """Return an independent ``np.random.Generator`` for ``(seed, *key)``.

    >>> a = substream(7, "row", 3, "feat").random()
    >>> b = substream(7, "row", 3, "feat").random()
    >>> a == b
    True
    """
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(_word(p) for p in key))
    return np.random.Generator(np.random.Philox(ss))


def row_feature_stream(seed, row):
    return substream(seed, "row", row, "feat")


def row_noise_stream(seed, row):
    return substream(seed, "row", row, "noise")
