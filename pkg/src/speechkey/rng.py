"""Deterministic, platform-independent random numbers for key generation.

All key material is derived from a SplitMix64 stream (Steele, Lea & Flood,
"Fast splittable pseudorandom number generators", OOPSLA 2014). SplitMix64 is
counter based: the k-th output (k = 1, 2, ...) of a generator seeded with
``s`` is ``mix(s + k * GAMMA mod 2**64)``. That makes it trivial to draw large
blocks with numpy while staying bit-identical to the scalar path, so stored
key fixtures never depend on the host's numpy or BLAS.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64 generator with scalar and vectorised draws.

    Both paths advance the same counter, so interleaving ``next_u64`` and
    ``u64_array`` gives the same numbers as drawing them one at a time.
    """

    def __init__(self, seed: int):
        if not 0 <= seed <= MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.counter = 0

    def next_u64(self) -> int:
        self.counter += 1
        return _mix((self.seed + self.counter * GAMMA) & MASK64)

    def u64_array(self, n: int) -> np.ndarray:
        ks = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        z = np.uint64(self.seed) + ks * np.uint64(GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
        return z ^ (z >> np.uint64(31))

    def random(self) -> float:
        """Uniform double in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def random_array(self, n: int) -> np.ndarray:
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection of the short final bucket."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def standard_normal(self, n: int) -> np.ndarray:
        """``n`` N(0, 1) draws via the Box-Muller transform.

        Uniforms are consumed in pairs (u1, u2); each pair yields
        ``r*cos(2*pi*u2)`` then ``r*sin(2*pi*u2)``.
        """
        pairs = (n + 1) // 2
        u = self.random_array(2 * pairs).reshape(pairs, 2)
        # 1 - u keeps the log argument in (0, 1]
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * math.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = r * np.cos(theta)
        z[:, 1] = r * np.sin(theta)
        return z.reshape(-1)[:n]
