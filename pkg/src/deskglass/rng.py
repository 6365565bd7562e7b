"""Counter-based deterministic random numbers.

Every draw is a pure function of (seed, counter), so streams can be
generated in any order, in parallel, or partially replayed and still come
out bit-identical.  The integer mixing is fixed-width 64-bit (splitmix64),
which is exact on every platform; only the float transcendentals in the
Gaussian transform are platform-dependent, at the ulp level.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = float(1 << 53)

# uint64 arithmetic below wraps mod 2**64 on purpose
_wrap_err = np.seterr(over="ignore")
np.seterr(**_wrap_err)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (x + _GOLDEN).astype(np.uint64)
        z ^= z >> np.uint64(30)
        z *= _MIX1
        z ^= z >> np.uint64(27)
        z *= _MIX2
        z ^= z >> np.uint64(31)
    return z


def _hash64(seed: int, counter: np.ndarray) -> np.ndarray:
    key = _splitmix64(np.uint64(np.uint64(seed) & np.uint64(0xFFFFFFFFFFFFFFFF)))
    with np.errstate(over="ignore"):
        return _splitmix64(counter.astype(np.uint64) + key)


def uniform(seed: int, counter) -> np.ndarray:
    """Uniform floats in [0, 1), one per counter value."""
    counter = np.atleast_1d(np.asarray(counter, dtype=np.uint64))
    return (_hash64(seed, counter) >> np.uint64(11)).astype(np.float64) / _U53


def normal(seed: int, counter) -> np.ndarray:
    """Standard normal draws, one per counter value (Box-Muller).

    Each output consumes two hashed uniforms derived from counters
    2*c and 2*c + 1, keeping distinct counters independent.
    """
    counter = np.atleast_1d(np.asarray(counter, dtype=np.uint64))
    with np.errstate(over="ignore"):
        c2 = counter * np.uint64(2)
        u1 = (_hash64(seed, c2) >> np.uint64(11)).astype(np.float64)
        u2 = (_hash64(seed, c2 + np.uint64(1)) >> np.uint64(11)).astype(np.float64)
    # shift u1 into (0, 1] so the log is finite
    u1 = (u1 + 1.0) / _U53
    u2 = u2 / _U53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def channel_counter(index, channel: int, lanes: int = 16) -> np.ndarray:
    """Disjoint counter lane for (sample index, channel id) pairs."""
    index = np.asarray(index, dtype=np.uint64)
    if not 0 <= channel < lanes:
        raise ValueError(f"channel {channel} outside 0..{lanes - 1}")
    with np.errstate(over="ignore"):
        return index * np.uint64(lanes) + np.uint64(channel)
