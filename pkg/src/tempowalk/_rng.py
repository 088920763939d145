"""Counter-derived random streams usable inside numba kernels.

Each walk or training worker gets its own SplitMix64 stream seeded by hashing
its coordinates, so results do not depend on scheduling.
"""

import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, inline="always")
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def stream_seed(seed, a, b, c):
    h = mix64(np.uint64(seed) + _GOLDEN)
    h = mix64(h ^ (np.uint64(a) + _GOLDEN))
    h = mix64(h ^ (np.uint64(b) + _GOLDEN))
    return mix64(h ^ (np.uint64(c) + _GOLDEN))


@nb.njit(cache=True, inline="always")
def next_uniform(state):
    """Uniform double in [0, 1); advances ``state[0]`` in place."""
    state[0] += _GOLDEN
    return (mix64(state[0]) >> np.uint64(11)) * _INV53


def new_state(seed: int, a: int = 0, b: int = 0, c: int = 0) -> np.ndarray:
    return np.array([stream_seed(np.uint64(seed & (2**64 - 1)), a, b, c)], dtype=np.uint64)
