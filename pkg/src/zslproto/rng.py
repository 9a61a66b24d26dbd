"""Deterministic random streams derived from one root seed.

Every source of randomness (weight init, epoch shuffling, lambda draws)
pulls from a named substream of the run's root seed, so reproducibility of
one stage does not depend on how many draws another stage consumed.
"""

import hashlib

import numpy as np


def substream(seed: int, label: str) -> np.random.Generator:
    """Return the generator for the named substream of ``seed``.

    The same (seed, label) pair always yields an identical stream across
    runs and platforms; distinct labels yield independent streams.
    """
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    words = tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))
    entropy = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.random.default_rng(np.random.SeedSequence(entropy=entropy, spawn_key=words))
