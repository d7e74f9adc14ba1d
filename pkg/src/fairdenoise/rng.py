"""Deterministic pseudo-randomness for schedules, noise, and weight init.

Everything that consumes randomness in this package goes through one
primitive: a SplitMix64 stream.  The stream is counter-based (state is
``seed + n * GOLDEN`` for the n-th draw), so a block of draws can be
produced either one by one in Python or as a whole with vectorized
uint64 numpy arithmetic; both paths emit the identical sequence.

Draw conventions, pinned here and relied on by the golden fixtures:

* bounded integers in ``[0, n)``: multiply-shift, ``(u * n) >> 64``
* booleans: most significant bit of a raw draw
* unit floats in ``[0, 1)``: ``(u >> 11) * 2^-53``
* Gaussian pairs: Box-Muller over two raw draws, with the first draw
  mapped to ``(0, 1]`` so the log never sees zero
* ``mix``: folds each argument into the accumulator with XOR followed by
  one golden-ratio-offset finalizer round
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def _finalize(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


def mix(seed: int, *parts: int) -> int:
    """Collapse (seed, parts...) into a single 64-bit stream seed."""
    acc = seed & MASK64
    for p in parts:
        acc = _finalize(((acc ^ (p & MASK64)) + GOLDEN) & MASK64)
    return acc


def fnv1a64(data: bytes) -> int:
    """FNV-1a over bytes; used to fold string ids into seed material."""
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & MASK64
    return h


class SplitMix64:
    """SplitMix64 stream with scalar and block (vectorized) draw paths."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return _finalize(self.state)

    def next_unit(self) -> float:
        """Uniform float64 in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def next_bool(self) -> bool:
        """Fair coin from the top bit of a raw draw."""
        return bool(self.next_u64() >> 63)

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n) via multiply-shift."""
        if n <= 0:
            raise ValueError(f"bound must be positive, got {n}")
        return (self.next_u64() * n) >> 64

    def next_uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next_unit()

    def block_u64(self, count: int) -> np.ndarray:
        """Next ``count`` raw draws as a uint64 array; advances the state."""
        if count == 0:
            return np.empty(0, dtype=np.uint64)
        idx = np.arange(1, count + 1, dtype=np.uint64)
        states = np.uint64(self.state) + idx * np.uint64(GOLDEN)
        self.state = (self.state + count * GOLDEN) & MASK64
        z = states
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
        return z ^ (z >> np.uint64(31))

    def block_unit(self, count: int) -> np.ndarray:
        """Next ``count`` uniform float64 values in [0, 1)."""
        return (self.block_u64(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def block_gauss(self, count: int) -> np.ndarray:
        """Next ``count`` standard normal values via Box-Muller.

        Pairs of raw draws produce (z0, z1); an odd count consumes a full
        final pair and discards its second half, keeping the stream
        position a pure function of the requested count.
        """
        pairs = (count + 1) // 2
        raw = self.block_u64(2 * pairs)
        u1 = ((raw[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (raw[1::2] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * math.pi) * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:count]


def gaussian(seed: int, count: int) -> np.ndarray:
    """Standard normal draws from a fresh stream seeded with ``seed``."""
    return SplitMix64(seed).block_gauss(count)
