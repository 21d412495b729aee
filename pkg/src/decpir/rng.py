"""Deterministic seed derivation for independent trial and session streams.

Trial ``t`` under master seed ``m`` uses ``derive_seed(m, t)``: the master is
passed through a splitmix64-style finalizer, xor-folded with each path
element, and mixed again.  The rule is fixed so that trial workers can run in
any order (or in parallel) and still produce identical results, and nested
contexts extend the path, e.g. ``derive_seed(m, trial, session)``.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(x: int) -> int:
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, *path: int) -> int:
    """Derive a child seed from a master seed and a path of integer indices."""
    state = _mix(master ^ _GOLDEN)
    for element in path:
        state = _mix(state ^ (element & _MASK64) ^ _GOLDEN)
    return state


def generator(seed: int) -> np.random.Generator:
    """A PCG64 generator for the given 64-bit seed."""
    return np.random.Generator(np.random.PCG64(seed & _MASK64))
