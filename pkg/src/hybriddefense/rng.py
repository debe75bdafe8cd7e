"""Counter-based SplitMix64 generator.

Every draw is a pure function of (seed, counter), so blocks of variates can be
produced with vectorized uint64 arithmetic and results never depend on how a
request is chunked.
"""

from __future__ import annotations

import hashlib

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *keys) -> int:
    """Derive an independent 64-bit seed for a named substream."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed & _MASK64).to_bytes(8, "little"))
    for key in keys:
        h.update(b"\x00")
        h.update(str(key).encode("utf-8"))
    z = np.array([int.from_bytes(h.digest(), "little")], dtype=np.uint64)
    return int(_mix(z)[0])


class SplitMix64:
    """SplitMix64 stream with numpy-vectorized output.

    >>> r = SplitMix64(1234)
    >>> hex(int(r.next_u64(1)[0]))
    '0xbb0cf61b2f181cdb'
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def next_u64(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            states = np.uint64(self.seed) + GOLDEN * idx
        return _mix(states)

    def uniform(self, size=None, low: float = 0.0, high: float = 1.0):
        """Uniform variates in [low, high) with 53-bit resolution."""
        shape = () if size is None else (size if isinstance(size, tuple) else (size,))
        n = int(np.prod(shape, dtype=np.int64))
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        u = low + (high - low) * u
        return float(u[0]) if size is None else u.reshape(shape)

    def normal(self, size) -> np.ndarray:
        """Standard normal variates (Box-Muller)."""
        shape = size if isinstance(size, tuple) else (size,)
        n = int(np.prod(shape, dtype=np.int64))
        m = (n + 1) // 2
        bits = self.next_u64(2 * m)
        # u1 in (0, 1] keeps the log finite
        u1 = ((bits[:m] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (bits[m:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
        return z[:n].reshape(shape)

    def integers(self, high: int, size) -> np.ndarray:
        """Integers in [0, high)."""
        u = self.uniform(size)
        return np.minimum((u * high).astype(np.int64), high - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of ``arange(n)``."""
        perm = np.arange(n)
        if n < 2:
            return perm
        u = self.uniform(n - 1)
        for step, i in enumerate(range(n - 1, 0, -1)):
            j = min(int(u[step] * (i + 1)), i)
            perm[i], perm[j] = perm[j], perm[i]
        return perm
