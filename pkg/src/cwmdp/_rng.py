"""Counter-based random numbers for reproducible ensembles.

Draw ``i`` of replica ``r`` is ``mix64(key_r + (i + 1) * GOLDEN)`` with
``key_r = replica_key(seed, r)``: a pure function of (seed, r, i), so an
ensemble gives the same per-replica output under any execution order.
The mixer is the SplitMix64 finaliser.
"""
import math

import numba as nb
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53


@nb.njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True, inline="always")
def uniform(key, counter):
    """Uniform on [0, 1) for draw number ``counter`` of stream ``key``."""
    z = mix64(key + (np.uint64(counter) + np.uint64(1)) * GOLDEN)
    return (z >> np.uint64(11)) * _TO_UNIT


@nb.njit(cache=True, inline="always")
def std_normal(key, counter):
    # Box-Muller on draws 2c, 2c+1; only the cosine branch is used
    u1 = uniform(key, np.uint64(2) * np.uint64(counter))
    u2 = uniform(key, np.uint64(2) * np.uint64(counter) + np.uint64(1))
    return math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(2.0 * math.pi * u2)


def _mix_py(z):
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def replica_key(seed, index):
    """Stream key for replica ``index`` of an ensemble seeded with ``seed``."""
    return np.uint64(_mix_py(_mix_py(int(seed)) + (int(index) + 1) * 0x9E3779B97F4A7C15))


def replica_keys(seed, count):
    return np.array([replica_key(seed, i) for i in range(count)], dtype=np.uint64)


@nb.njit(cache=True)
def uniforms_for_keys(keys, counter):
    out = np.empty(keys.shape[0])
    for i in range(keys.shape[0]):
        out[i] = uniform(keys[i], counter)
    return out
