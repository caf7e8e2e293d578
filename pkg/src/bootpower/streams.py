"""Deterministic random-stream derivation for reproducible parallel runs.

Every replicate, and every period/cluster inside a replicate, draws from its
own generator whose seed is derived by hashing a path of labels into 64 bits.
Results are therefore independent of execution order and worker count: the
same path always yields the same stream, no matter which process consumes it.

The mixing function is splitmix64 (Steele, Lea & Flood's published finalizer,
the same one used by java.util.SplittableRandom). It is fixed here as part of
the package's reproducibility contract; changing it changes every seeded
result.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 step: advance by the golden gamma and finalize."""
    x = (x + _GAMMA) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _as_word(part: int | str) -> int:
    if isinstance(part, str):
        acc = len(part)
        for b in part.encode("utf-8"):
            acc = splitmix64(acc ^ b)
        return acc
    return part & _MASK64


def derive_seed(*parts: int | str) -> int:
    """Fold a path of integer/string labels into one 64-bit seed."""
    acc = splitmix64(len(parts))
    for part in parts:
        acc = splitmix64(acc ^ _as_word(part))
    return acc


@dataclass(frozen=True)
class Stream:
    """A point in the seed tree.

    ``child(*labels)`` derives a sub-stream; ``generator()`` materializes a
    numpy Generator. Calling ``generator()`` twice returns generators in the
    same state, so each logical consumer should own its path.
    """

    seed: int

    def child(self, *parts: int | str) -> "Stream":
        return Stream(derive_seed(self.seed, *parts))

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)
