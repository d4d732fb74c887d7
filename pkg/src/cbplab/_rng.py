"""Seed derivation and counter-based substreams.

Every random draw in the package flows through a Philox (counter-based)
generator whose key is derived from (seed, integer labels) with splitmix64.
Substreams are independent of evaluation order and batching, so any result
is reproducible from its seed alone.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 mixing round; maps uint64 to uint64."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def derive_seed(seed: int, *labels: int) -> int:
    """Fold integer labels into ``seed``, one mixing round per label."""
    x = splitmix64(seed & _MASK64)
    for lab in labels:
        x = splitmix64(x ^ (int(lab) & _MASK64))
    return x


def substream(seed: int, *labels: int) -> np.random.Generator:
    """A Generator on its own Philox stream for (seed, *labels)."""
    return np.random.Generator(np.random.Philox(key=derive_seed(seed, *labels)))
