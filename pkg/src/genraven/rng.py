"""Deterministic counter-based random streams.

Every random decision in the package draws from a Stream keyed by a 64-bit
value folded from (seed, stream label, unit indices).  Draw i of a stream is
a pure function of (key, i) - a SplitMix64-style mix of key + i * GOLDEN -
so a given unit of work produces identical bytes regardless of which other
units run, in what order, or on how many workers.  Plain integer arithmetic
only: no dependence on platform word size or library version.
"""

from __future__ import annotations

import hashlib
from typing import MutableSequence, Sequence, TypeVar, Union

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_PAD = 0x243F6A8885A308D3

T = TypeVar("T")


def _mix(x: int) -> int:
    # SplitMix64 finalizer (public-domain constants).
    x &= _MASK
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def _word(part: Union[int, str]) -> int:
    if isinstance(part, str):
        return int.from_bytes(hashlib.sha256(part.encode("utf-8")).digest()[:8], "little")
    return part & _MASK


def fold_key(*parts: Union[int, str]) -> int:
    """Fold integers and strings into a 64-bit stream key.

    Strings hash through sha256 so labels of any length mix fully; the fold
    is order-sensitive.
    """
    key = _PAD
    for p in parts:
        key = _mix(key ^ _mix((_word(p) + _GOLDEN) & _MASK))
    return key


class Stream:
    """A counter-based random stream over a fixed 64-bit key."""

    __slots__ = ("key", "_i")

    def __init__(self, key: int):
        self.key = key & _MASK
        self._i = 0

    @classmethod
    def from_parts(cls, *parts: Union[int, str]) -> "Stream":
        return cls(fold_key(*parts))

    def next_word(self) -> int:
        """The next raw 64-bit draw."""
        self._i += 1
        return _mix((self.key + self._i * _GOLDEN) & _MASK)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n).  Unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("randbelow needs a positive bound")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_word()
            if r < limit:
                return r % n

    def randrange(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi)."""
        if hi <= lo:
            raise ValueError(f"empty range [{lo}, {hi})")
        return lo + self.randbelow(hi - lo)

    def choice(self, seq: Sequence[T]) -> T:
        return seq[self.randbelow(len(seq))]

    def shuffle(self, xs: MutableSequence) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(xs) - 1, 0, -1):
            j = self.randbelow(i + 1)
            xs[i], xs[j] = xs[j], xs[i]

    def subset_indices(self, n: int, k: int) -> tuple[int, ...]:
        """A uniform size-k subset of range(n), returned sorted."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot take {k} of {n}")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return tuple(sorted(pool[:k]))


def unit_stream(seed: int, label: str, *indices: int) -> Stream:
    """The stream for one unit of work, e.g. (seed, "train", rule_index, i)."""
    return Stream.from_parts(seed, label, *indices)
