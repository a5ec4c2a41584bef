"""Deterministic random numbers built on the splitmix64 mixing function.

Every stochastic step in this package (phantom generation, weight
initialization, epoch shuffles, anchor sampling, session plans) draws from
this generator so that identical seeds reproduce identical bytes on disk.
The generator is counter-based: output ``i`` is a pure function of
``(seed, i)``, which makes block generation vectorizable in numpy.

Constants are the standard splitmix64 ones (Steele, Lea, Flood 2014):

    state_i = seed + (i + 1) * 0x9E3779B97F4A7C15          (mod 2^64)
    z = state_i
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9               (mod 2^64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB               (mod 2^64)
    out_i = z ^ (z >> 31)

Uniform doubles take the top 53 bits: ``(out >> 11) * 2**-53``.
Gaussians use the Box-Muller transform on consecutive uniform pairs.
Bounded integers are ``out % bound`` (bias < bound / 2**64, irrelevant at
this scale). Shuffles are a backward Fisher-Yates pass.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U64_GOLDEN = np.uint64(_GOLDEN)
_U64_MIX1 = np.uint64(_MIX1)
_U64_MIX2 = np.uint64(_MIX2)
_TWO_NEG53 = 2.0 ** -53


def mix64(z: int) -> int:
    """splitmix64 finalizer on a single 64-bit integer."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _U64_MIX1
    z = (z ^ (z >> np.uint64(27))) * _U64_MIX2
    return z ^ (z >> np.uint64(31))


class DeterministicRng:
    """Counter-based splitmix64 stream with derivable substreams."""

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._counter = 0

    def derive(self, *tags: int) -> "DeterministicRng":
        """Child stream keyed by integer tags; independent of stream position."""
        s = self.seed
        for t in tags:
            s = (mix64(s + _GOLDEN) ^ mix64(t & _MASK64)) & _MASK64
        return DeterministicRng(mix64(s))

    def u64(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs as a uint64 array."""
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            state = np.uint64(self.seed) + idx * _U64_GOLDEN
            return _mix64_array(state)

    def next_u64(self) -> int:
        self._counter += 1
        state = (self.seed + self._counter * _GOLDEN) & _MASK64
        return mix64(state)

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """``n`` doubles uniform on [low, high)."""
        u = (self.u64(n) >> np.uint64(11)).astype(np.float64) * _TWO_NEG53
        return low + u * (high - low)

    def normal(self, n: int, sigma: float = 1.0) -> np.ndarray:
        """``n`` zero-mean Gaussian doubles via Box-Muller."""
        m = (n + 1) // 2
        raw = self.u64(2 * m)
        # u1 in (0, 1] so the log is finite
        u1 = ((raw[:m] >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_NEG53
        u2 = (raw[m:] >> np.uint64(11)).astype(np.float64) * _TWO_NEG53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        out = np.empty(2 * m)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return sigma * out[:n]

    def below(self, bound: int) -> int:
        """One integer uniform on [0, bound)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % bound

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def shuffle(self, items: list) -> list:
        """Shuffled copy of a list (backward Fisher-Yates)."""
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.below(i + 1)
            out[i], out[j] = out[j], out[i]
        return out

    def choice(self, n: int, k: int) -> np.ndarray:
        """Uniform k-subset of range(n) via a partial forward Fisher-Yates.

        Only the first ``k`` swap steps run, so the cost is O(k) draws.
        """
        if k > n:
            raise ValueError(f"cannot choose {k} of {n}")
        pool = np.arange(n)
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
