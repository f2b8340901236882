"""Deterministic 64-bit PRNG (SplitMix64).

Every source of randomness in the package flows through this generator so
that a run is a pure function of its seeds, identically on every platform.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def derive_seed(base: int, *indices: int) -> int:
    """Derive an independent child seed from a base seed and integer indices.

    Used to give every image / instance / epoch its own stream so that
    generation order (or parallelism) cannot change the output. The base is
    avalanched and each index multiplied before mixing, so (base, index)
    pairs cannot alias by simple addition.
    """
    z = _mix(base & _MASK)
    for idx in indices:
        z = _mix((z + _GAMMA + (idx & _MASK) * _MIX1) & _MASK)
    return z


class Prng:
    """SplitMix64 generator.

    next() advances: state += 0x9E3779B97F4A7C15, then avalanches the state
    through two xor-multiply rounds. Identical seeds give identical
    sequences everywhere.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        return _mix(self.state)

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 bits of precision."""
        return (self.next() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.next_float()

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = _MASK - (_MASK + 1) % n
        while True:
            z = self.next()
            if z <= limit:
                return z % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def normal(self) -> float:
        """Standard normal via Box-Muller (uses two draws)."""
        import math

        u1 = self.next_float()
        u2 = self.next_float()
        while u1 <= 1e-300:
            u1 = self.next_float()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def splitmix_block(seed: int, start: int, count: int):
    """Vectorized outputs of Prng(seed).next() calls start+1 .. start+count.

    SplitMix64 is counter-based (the i-th output is a pure function of
    seed + i * gamma), so whole blocks can be produced with numpy uint64
    arithmetic, bit-identical to the scalar generator.
    """
    import numpy as np

    i = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = np.uint64(seed) + i * np.uint64(_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def normal_field(seed: int, shape: tuple):
    """Deterministic standard-normal array via Box-Muller over SplitMix64."""
    import numpy as np

    n = int(np.prod(shape))
    scale = 1.0 / (1 << 53)
    u1 = (splitmix_block(seed, 0, n) >> np.uint64(11)).astype(np.float64) * scale
    u2 = (splitmix_block(seed, n, n) >> np.uint64(11)).astype(np.float64) * scale
    u1 = np.maximum(u1, 1e-300)
    return (np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)).reshape(shape)
