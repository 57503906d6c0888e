"""Counter-based random streams.

Every random number is a pure function of ``(seed, block, i, j, lane)``,
obtained by chaining the SplitMix64 finalizer over the key components.
Sampling order, vectorization and worker scheduling therefore never change
values.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _u64(x) -> np.ndarray:
    if isinstance(x, (int, np.integer)):
        return np.array([int(x) & _MASK64], dtype=np.uint64)
    return np.atleast_1d(np.asarray(x)).astype(np.uint64)


def mix64(x: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=np.uint64, copy=True)
    with np.errstate(over="ignore"):
        x ^= x >> np.uint64(30)
        x *= _M1
        x ^= x >> np.uint64(27)
        x *= _M2
        x ^= x >> np.uint64(31)
    return x


def hash_keys(seed, *keys) -> np.ndarray:
    """64-bit hash of the key tuple; array keys broadcast together."""
    with np.errstate(over="ignore"):
        h = mix64(_u64(seed) + _GOLDEN)
        for k in keys:
            h = mix64((h ^ _u64(k)) + _GOLDEN)
    return h


def derive_seed(seed, *keys) -> int:
    """A child seed for an independent stream (e.g. one trial of an experiment)."""
    return int(hash_keys(seed, *keys).reshape(-1)[0])


def uniform(seed, *keys) -> np.ndarray:
    """Uniform doubles in the open interval (0, 1)."""
    h = hash_keys(seed, *keys)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)


def normal_pair(seed, *keys) -> tuple[np.ndarray, np.ndarray]:
    """Two independent standard normals per key (Box-Muller on lanes 0 and 1)."""
    u1 = uniform(seed, *keys, 0)
    u2 = uniform(seed, *keys, 1)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    return r * np.cos(theta), r * np.sin(theta)
