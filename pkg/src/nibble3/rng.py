"""Counter-based deterministic random numbers.

Every draw is a pure function of (seed, *key parts): there is no stream
state, so draws can be made lazily, in any order, and from any number of
workers without changing a single bit of output.  The generator is a
splitmix/murmur-style 64-bit finalizer chained over the key parts; the
scalar and vectorized paths produce identical bits (tested).
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xFF51AFD7ED558CCD
_M2 = 0xC4CEB9FE1A85EC53

# numpy constants, kept as uint64 so arithmetic wraps mod 2**64
_NP_GOLDEN = np.uint64(_GOLDEN)
_NP_M1 = np.uint64(_M1)
_NP_M2 = np.uint64(_M2)
_NP_33 = np.uint64(33)
_INV_2_53 = 2.0 ** -53


def _mix(h: int) -> int:
    """64-bit avalanche finalizer (murmur3 fmix64)."""
    h ^= h >> 33
    h = (h * _M1) & _MASK
    h ^= h >> 33
    h = (h * _M2) & _MASK
    h ^= h >> 33
    return h


def key_hash(seed: int, *parts: int) -> int:
    """Hash (seed, parts...) to a uniformly mixed 64-bit value."""
    h = _mix((seed & _MASK) ^ _GOLDEN)
    for p in parts:
        h = _mix(h ^ (((p & _MASK) + 1) * _GOLDEN & _MASK))
    return h


def uniform(seed: int, *parts: int) -> float:
    """Deterministic uniform draw in [0, 1) keyed by (seed, parts...)."""
    return (key_hash(seed, *parts) >> 11) * _INV_2_53


def _mix_np(h: np.ndarray) -> np.ndarray:
    h = h ^ (h >> _NP_33)
    h = h * _NP_M1
    h = h ^ (h >> _NP_33)
    h = h * _NP_M2
    return h ^ (h >> _NP_33)


def uniform_array(seed: int, *parts) -> np.ndarray:
    """Vectorized `uniform`: scalar or array key parts, numpy broadcasting.

    Bit-identical to the scalar path for every key.
    """
    h = np.uint64(_mix((seed & _MASK) ^ _GOLDEN))
    with np.errstate(over="ignore"):
        for p in parts:
            pa = np.asarray(p, dtype=np.uint64)
            h = _mix_np(h ^ ((pa + np.uint64(1)) * _NP_GOLDEN))
    return (h >> np.uint64(11)).astype(np.float64) * _INV_2_53


def spawn_key(seed: int, *parts: int) -> int:
    """Derive a 64-bit subkey, e.g. for seeding a numpy Generator."""
    return key_hash(seed, *parts)
