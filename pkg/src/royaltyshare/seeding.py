"""Deterministic stream splitting for all randomness in the package.

Every random quantity flows from one root seed. Substreams are derived with
``SeedSequence`` spawn keys over the counter-based Philox generator, so a
stream is a pure function of ``(seed, key...)``: permutation j of a Monte
Carlo run or trajectory k of a density estimate always sees the same stream
no matter how work is chunked across workers.
"""

from __future__ import annotations

import numpy as np


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for substream ``key`` of root ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *key: int) -> int:
    """Collapse ``(seed, key...)`` into a fresh uint64 root for a subsystem."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])
