"""Reproducible random streams.

A stream is a :class:`numpy.random.Generator` backed by PCG64, whose output
sequence for a given 64-bit seed is fixed across platforms. Independent
streams for parallel work are obtained by seed derivation with SplitMix64,
never by sharing one generator.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x):
    """One SplitMix64 output for the state ``x`` (Steele, Lea & Flood 2014)."""
    z = (int(x) + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master, index):
    """Child seed for task ``index`` of ``master``.

    ``derive_seed(s, i) = splitmix64(splitmix64(s) ^ i)`` with all arithmetic
    modulo 2**64.
    """
    return splitmix64(splitmix64(int(master) & MASK64) ^ (int(index) & MASK64))


def make_rng(seed):
    """Generator for a 64-bit unsigned ``seed``."""
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))
