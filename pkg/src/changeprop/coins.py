"""Repeatable per-(round, id) coin flips.

Contraction algorithms break symmetry with coin flips that must be replayable:
re-executing a computation during propagation has to observe the same flip it
saw originally, so the flip is a pure function of (seed, round, id) rather
than a stream.  Bits come from a splitmix64-style finalizer, which is cheap
and mixes well enough for the unbiasedness and avalanche checks in the tests.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


class CoinOracle:
    """Deterministic unbiased coin keyed by (seed, round, id)."""

    __slots__ = ("seed", "_base")

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        self._base = _mix(self.seed * 0x9E3779B97F4A7C15 & _MASK)

    def heads(self, round_: int, ident: int) -> bool:
        z = (self._base + round_ * 0xD1342543DE82EF95 + ident * 0x2545F4914F6CDD1D) & _MASK
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
        return (z ^ (z >> 31)) & 1 == 1

    def word(self, round_: int, ident: int) -> int:
        """Full 64-bit mixed word, for the avalanche diagnostics."""
        z = (self._base + round_ * 0xD1342543DE82EF95 + ident * 0x2545F4914F6CDD1D) & _MASK
        return _mix(z)
