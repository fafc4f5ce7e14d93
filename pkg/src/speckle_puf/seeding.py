"""Deterministic derivation of independent RNG streams.

Every random quantity in the simulator is drawn from a stream derived by
hashing a master seed together with a namespace key (entity kind plus
identifiers).  Streams are therefore independent of each other and of the
order in which they are created, which is what makes whole-pipeline reruns
byte-identical.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed_sequence(master_seed: int, *key) -> np.random.SeedSequence:
    """SeedSequence keyed by (master_seed, *key); key parts are stringified."""
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode())
    for part in key:
        h.update(b"/")
        h.update(str(part).encode())
    digest = h.digest()
    words = [int.from_bytes(digest[i : i + 8], "little") for i in range(0, 32, 8)]
    return np.random.SeedSequence(words)


def derive_rng(master_seed: int, *key) -> np.random.Generator:
    """Independent PCG64 generator for the given namespace key."""
    return np.random.default_rng(derive_seed_sequence(master_seed, *key))


def derive_seed(master_seed: int, *key) -> int:
    """64-bit child seed (for manifests and config expansion)."""
    return int(derive_seed_sequence(master_seed, *key).generate_state(1, np.uint64)[0])
