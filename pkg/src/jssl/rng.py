"""Seed derivation and random generators.

All randomness in the package flows from numpy's PCG64 bit generator,
seeded through :func:`derive_seed`, which hashes an arbitrary tuple of
labels with BLAKE2b. Results therefore do not depend on execution order
or on the number of worker processes.
"""
import hashlib

import numpy as np

UINT64_MASK = (1 << 64) - 1


def derive_seed(*parts):
    """Deterministic unsigned 64-bit seed from a tuple of labels."""
    h = hashlib.blake2b(repr(tuple(parts)).encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def make_rng(*parts):
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))


def splitmix64(state):
    """One step of SplitMix64 on a Python int. Returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & UINT64_MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & UINT64_MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & UINT64_MASK
    return state, z ^ (z >> 31)
