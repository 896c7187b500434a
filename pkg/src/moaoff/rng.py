"""SplitMix64: a 64-bit-state generator whose output depends only on integer arithmetic.

Used for the accuracy draws so that reports are identical on every platform
and so each request gets its own sub-stream keyed by its id. The same
request therefore sees the same uniforms under every routing strategy.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        return mix64(self.state)

    def random(self) -> float:
        """Uniform double in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def split(self, key: int) -> SplitMix64:
        """Independent child stream for ``key``; does not advance this stream."""
        return SplitMix64(mix64(self.state ^ mix64((key * _GOLDEN + 1) & _MASK)))
