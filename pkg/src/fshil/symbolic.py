"""Exact two-track shift spaces: sequences, cylinders, Bernoulli measures.

Everything here is computed exactly (integer or closed-form float), with
no dynamics involved; the return-map side is tested against these values.
The two tracks are the half-interval track with alphabet {0, 1} and the
crossing-count track with alphabet {1, ..., k}; a point of the product
space is a pair of sequences advanced simultaneously by the shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

__all__ = [
    "BernoulliMeasure",
    "Cylinder",
    "SymbolSequence",
    "count_periodic",
    "cylinder_measure",
    "distance",
    "shift",
    "shift_entropy",
]

# scan horizon for lazily generated sequences without an exact equality test
_SCAN_CAP = 600


class SymbolSequence:
    """One track of symbols: a repeating finite word, or a finite prefix
    that may extend itself through a generator callable."""

    __slots__ = ("kind", "lo", "hi", "_word", "_entries", "_gen")

    def __init__(self, kind, lo, hi, word=None, entries=None, gen=None):
        if lo > hi:
            raise ValueError(f"empty alphabet [{lo}, {hi}]")
        self.kind = kind
        self.lo = int(lo)
        self.hi = int(hi)
        if kind == "periodic":
            word = tuple(int(v) for v in word)
            if not word:
                raise ValueError("periodic word must be non-empty")
            self._check(word)
            self._word = word
            self._entries = None
            self._gen = None
        elif kind == "finite":
            entries = [int(v) for v in entries]
            self._check(entries)
            self._word = None
            self._entries = entries
            self._gen = gen
        else:
            raise ValueError(f"unknown kind {kind!r}")

    def _check(self, vals):
        for v in vals:
            if not (self.lo <= v <= self.hi):
                raise ValueError(
                    f"symbol {v} outside alphabet [{self.lo}, {self.hi}]"
                )

    @classmethod
    def periodic(cls, word, lo, hi) -> "SymbolSequence":
        return cls("periodic", lo, hi, word=word)

    @classmethod
    def finite(
        cls,
        entries,
        lo,
        hi,
        gen: Optional[Callable[[int], int]] = None,
    ) -> "SymbolSequence":
        """Prefix sequence; gen(i) supplies deeper entries on demand."""
        return cls("finite", lo, hi, entries=entries, gen=gen)

    @property
    def period(self) -> Optional[int]:
        return len(self._word) if self.kind == "periodic" else None

    @property
    def depth(self) -> Optional[int]:
        """Materialized prefix length; None for periodic (unbounded)."""
        if self.kind == "periodic":
            return None
        if self._gen is not None:
            return None
        return len(self._entries)

    def __getitem__(self, i: int) -> int:
        if i < 0:
            raise IndexError("sequences are one-sided")
        if self.kind == "periodic":
            return self._word[i % len(self._word)]
        while i >= len(self._entries):
            if self._gen is None:
                raise IndexError(f"prefix of depth {len(self._entries)} has no entry {i}")
            v = int(self._gen(len(self._entries)))
            self._check((v,))
            self._entries.append(v)
        return self._entries[i]

    def known_bound(self) -> int:
        """Number of entries retrievable without error (scan cap for lazy)."""
        if self.kind == "periodic" or self._gen is not None:
            return _SCAN_CAP
        return len(self._entries)

    def shifted(self) -> "SymbolSequence":
        if self.kind == "periodic":
            w = self._word
            return SymbolSequence.periodic(w[1:] + w[:1], self.lo, self.hi)
        if self._gen is None:
            if not self._entries:
                raise ValueError("cannot shift an empty prefix")
            return SymbolSequence.finite(self._entries[1:], self.lo, self.hi)
        return SymbolSequence.finite(
            [], self.lo, self.hi, gen=lambda i, s=self: s[i + 1]
        )

    def __repr__(self):
        if self.kind == "periodic":
            return f"SymbolSequence.periodic({self._word}, {self.lo}, {self.hi})"
        tail = ", lazy" if self._gen is not None else ""
        return (
            f"SymbolSequence.finite({tuple(self._entries)}, "
            f"{self.lo}, {self.hi}{tail})"
        )


def shift(seq):
    """Advance by one symbol; a pair of tracks is advanced in lockstep."""
    if isinstance(seq, tuple):
        return tuple(s.shifted() for s in seq)
    return seq.shifted()


def _exactly_equal(a: SymbolSequence, b: SymbolSequence) -> Optional[bool]:
    """Exact equality when decidable, else None."""
    if a.kind == "periodic" and b.kind == "periodic":
        n = math.lcm(a.period, b.period)
        return all(a[i] == b[i] for i in range(n))
    if (
        a.kind == "finite"
        and b.kind == "finite"
        and a.depth is not None
        and b.depth is not None
    ):
        if a.depth != b.depth:
            return None
        return a._entries == b._entries
    return None


def distance(a: SymbolSequence, b: SymbolSequence) -> float:
    """Ultrametric on one track: (1/2)^n with n the largest index bound
    through which the sequences agree; 1 when they already differ at the
    start, 0 when they are exactly equal."""
    if (a.lo, a.hi) != (b.lo, b.hi):
        raise ValueError(
            f"sequences on different tracks: [{a.lo},{a.hi}] vs [{b.lo},{b.hi}]"
        )
    if _exactly_equal(a, b):
        return 0.0
    if a.kind == "periodic" and b.kind == "periodic":
        limit = math.lcm(a.period, b.period)
    else:
        limit = min(a.known_bound(), b.known_bound())
    for i in range(limit):
        try:
            av, bv = a[i], b[i]
        except IndexError:
            i -= 1
            break
        if av != bv:
            return 0.5 ** max(i - 1, 0)
    # agreement through the whole comparable range: report its resolution
    return 0.5 ** max(limit - 1, 0)


@dataclass(frozen=True)
class Cylinder:
    """Fixed finite block of symbols starting at index `start`; either
    track may be left free (None)."""

    start: int
    half_word: Optional[tuple[int, ...]] = None
    count_word: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.start < 0:
            raise ValueError("start index must be non-negative")
        hw, cw = self.half_word, self.count_word
        if hw is None and cw is None:
            raise ValueError("cylinder must constrain at least one track")
        if hw is not None:
            object.__setattr__(self, "half_word", tuple(int(v) for v in hw))
            if len(self.half_word) < 1:
                raise ValueError("cylinder block must have length >= 1")
            if any(v not in (0, 1) for v in self.half_word):
                raise ValueError(f"half-track symbols must be 0/1: {hw}")
        if cw is not None:
            object.__setattr__(self, "count_word", tuple(int(v) for v in cw))
            if len(self.count_word) < 1:
                raise ValueError("cylinder block must have length >= 1")
            if any(v < 1 for v in self.count_word):
                raise ValueError(f"count-track symbols start at 1: {cw}")
        if hw is not None and cw is not None and len(self.half_word) != len(
            self.count_word
        ):
            raise ValueError("both tracks must fix blocks of equal length")

    @property
    def block_length(self) -> int:
        if self.half_word is not None:
            return len(self.half_word)
        return len(self.count_word)


@dataclass(frozen=True)
class BernoulliMeasure:
    """Product measure: one probability vector per track.  The half track
    indexes symbols 0..1 directly; the count track assigns count_p[b-1]
    to symbol b in {1, ..., k}."""

    half_p: Optional[tuple[float, ...]] = None
    count_p: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.half_p is None and self.count_p is None:
            raise ValueError("measure must cover at least one track")
        for name, vec, want_len in (
            ("half_p", self.half_p, 2),
            ("count_p", self.count_p, None),
        ):
            if vec is None:
                continue
            vec = tuple(float(v) for v in vec)
            object.__setattr__(self, name, vec)
            if want_len is not None and len(vec) != want_len:
                raise ValueError(f"{name} must have length {want_len}")
            if not vec:
                raise ValueError(f"{name} must be non-empty")
            if any(v < 0 or v > 1 for v in vec):
                raise ValueError(f"{name} entries must lie in [0, 1]: {vec}")
            if abs(sum(vec) - 1.0) > 1e-12:
                raise ValueError(f"{name} must sum to 1 within 1e-12: {vec}")

    @property
    def k(self) -> Optional[int]:
        return None if self.count_p is None else len(self.count_p)


def cylinder_measure(mu: BernoulliMeasure, c: Cylinder) -> float:
    """Product of symbol probabilities over the fixed block, one factor per
    constrained track entry; independent of the start index."""
    out = 1.0
    if c.half_word is not None:
        if mu.half_p is None:
            raise ValueError("cylinder fixes the half track but the measure lacks half_p")
        for a in c.half_word:
            out *= mu.half_p[a]
    if c.count_word is not None:
        if mu.count_p is None:
            raise ValueError("cylinder fixes the count track but the measure lacks count_p")
        k = len(mu.count_p)
        for b in c.count_word:
            if b > k:
                raise ValueError(f"count symbol {b} exceeds alphabet size {k}")
            out *= mu.count_p[b - 1]
    return out


def count_periodic(k: int, n: int) -> int:
    """Number of period-n points (period dividing n) of the two-track
    shift with count alphabet size k: (2k)^n, exact."""
    if k < 1 or n < 1:
        raise ValueError("k and n must be >= 1")
    return (2 * k) ** n


def shift_entropy(k: int) -> float:
    """Topological entropy of the two-track shift: log(2k)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return math.log(2 * k)
