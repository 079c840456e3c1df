"""Order-independent random streams for Monte Carlo trials.

A trial's stream seed is ``mix64(master_seed, trial_index, purpose_tag)``::

    tag   = FNV-1a 64 of the UTF-8 purpose tag
    h     = splitmix64(master_seed mod 2**64)
    h     = splitmix64(h XOR (trial_index mod 2**64))
    h     = splitmix64(h XOR tag)

``splitmix64(x)`` is the SplitMix64 output function applied to
``x + 0x9E3779B97F4A7C15``::

    z = (x + 0x9E3779B97F4A7C15) mod 2**64
    z = ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z = ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    return z XOR (z >> 31)

The 64-bit result seeds a NumPy ``PCG64`` generator.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & MASK64
    return h


def mix64(master_seed: int, trial_index: int, purpose_tag: str) -> int:
    h = splitmix64(master_seed & MASK64)
    h = splitmix64(h ^ (trial_index & MASK64))
    return splitmix64(h ^ fnv1a64(purpose_tag))


def stream(master_seed: int, trial_index: int, purpose_tag: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(mix64(master_seed, trial_index, purpose_tag)))
