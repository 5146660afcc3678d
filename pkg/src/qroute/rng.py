"""Counter-based random streams keyed by (master seed, experiment, trial)."""
from __future__ import annotations

import zlib

import numpy as np


def _key_int(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    k = int(k)
    if k < 0:
        raise ValueError("seed components must be non-negative")
    return k


def _flatten(parts):
    for p in parts:
        if isinstance(p, (tuple, list)):
            yield from _flatten(p)
        else:
            yield p


def derive_rng(master_seed, *keys) -> np.random.Generator:
    """Philox stream for the given key path.

    The stream depends only on the key path, never on call order, so tasks
    can run in any order or in parallel.
    """
    if isinstance(master_seed, np.random.Generator):
        return master_seed
    entropy = [_key_int(p) for p in _flatten([master_seed, *keys])]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
