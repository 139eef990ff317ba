"""Deterministic 64-bit PRNG with named substreams.

The generator is a plain splitmix64: state advances by the golden-gamma
constant and each output is a finalizer over the new state. All arithmetic
is integer mod 2**64, so identical seeds produce identical streams on any
platform or implementation.

Substreams are derived by mixing the parent seed with an FNV-1a hash of the
substream name (plus an integer index for retry sequences), which keeps
independent concerns (terrain, cows, respawn retries) on independent
streams without any shared-state coupling.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1

_GAMMA = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return (z ^ (z >> 31)) & MASK64


def fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = (h ^ byte) * _FNV_PRIME & MASK64
    return h


def substream_seed(seed: int, name: str, index: int = 0) -> int:
    """Derive the seed of the named substream of `seed`."""
    z = (seed & MASK64) ^ fnv1a64(name)
    z = (z + index * _GAMMA) & MASK64
    return _mix(z)


class SplitMix64:
    """Sequential splitmix64 stream."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & MASK64
        return _mix(self._state)

    def uniform(self) -> float:
        """Float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi] via rejection-free modulo (bias negligible for small ranges)."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        span = hi - lo + 1
        return lo + self.next_u64() % span

    def choice(self, seq):
        if not seq:
            raise ValueError("choice from empty sequence")
        return seq[self.randint(0, len(seq) - 1)]

    def shuffle(self, items: list) -> None:
        """Fisher-Yates, in place."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(0, i)
            items[i], items[j] = items[j], items[i]


def cell_hash(seed: int, x: int, y: int, salt: int = 0) -> float:
    """Stateless per-cell uniform in [0, 1), stable in (seed, x, y, salt)."""
    z = (seed & MASK64) ^ (x * 0x8B72E3BAD3C8A6A9) ^ (y * 0xD6E8FEB86659FD93) ^ (salt * _GAMMA)
    return (_mix(z & MASK64) >> 11) * (1.0 / (1 << 53))
