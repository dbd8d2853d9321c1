"""Finite unions of disjoint real intervals with optional infinite endpoints."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True, order=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints cannot be NaN")
        if not self.lo < self.hi:
            raise ValueError(f"empty or degenerate interval [{self.lo}, {self.hi}]")
        # infinite endpoints are always open
        if math.isinf(self.lo):
            object.__setattr__(self, "lo_closed", False)
        if math.isinf(self.hi):
            object.__setattr__(self, "hi_closed", False)

    def __contains__(self, z: float) -> bool:
        above = z >= self.lo if self.lo_closed else z > self.lo
        below = z <= self.hi if self.hi_closed else z < self.hi
        return above and below

    def __str__(self) -> str:
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo:.17g}, {self.hi:.17g}{right}"


class IntervalSet:
    """Sorted, non-overlapping union of intervals. Touching pieces are merged."""

    __slots__ = ("intervals",)

    def __init__(self, intervals: Iterable[Interval | tuple] = ()):
        items = sorted(iv if isinstance(iv, Interval) else Interval(*iv) for iv in intervals)
        merged: list[Interval] = []
        for iv in items:
            if merged and (iv.lo < merged[-1].hi or (iv.lo == merged[-1].hi and (iv.lo_closed or merged[-1].hi_closed))):
                last = merged[-1]
                if iv.hi > last.hi or (iv.hi == last.hi and iv.hi_closed):
                    merged[-1] = Interval(last.lo, iv.hi, last.lo_closed, iv.hi_closed or (iv.hi == last.hi and last.hi_closed))
            else:
                merged.append(iv)
        self.intervals: tuple[Interval, ...] = tuple(merged)

    @classmethod
    def real_line(cls) -> "IntervalSet":
        return cls([Interval(-math.inf, math.inf, False, False)])

    @classmethod
    def single(cls, lo: float, hi: float, lo_closed: bool = True, hi_closed: bool = True) -> "IntervalSet":
        return cls([Interval(lo, hi, lo_closed, hi_closed)])

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def __bool__(self) -> bool:
        return bool(self.intervals)

    def __eq__(self, other) -> bool:
        return isinstance(other, IntervalSet) and self.intervals == other.intervals

    def __hash__(self):
        return hash(self.intervals)

    def __repr__(self) -> str:
        return "IntervalSet(" + " U ".join(str(iv) for iv in self.intervals) + ")" if self else "IntervalSet(empty)"

    def __contains__(self, z: float) -> bool:
        return any(z in iv for iv in self.intervals)

    @property
    def lower(self) -> float:
        return self.intervals[0].lo if self else math.nan

    @property
    def upper(self) -> float:
        return self.intervals[-1].hi if self else math.nan

    def endpoints(self) -> list[float]:
        return [e for iv in self.intervals for e in (iv.lo, iv.hi) if math.isfinite(e)]

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        for a in self.intervals:
            for b in other.intervals:
                if a.lo > b.lo or (a.lo == b.lo and not a.lo_closed):
                    lo, lo_c = a.lo, a.lo_closed
                else:
                    lo, lo_c = b.lo, b.lo_closed
                if a.hi < b.hi or (a.hi == b.hi and not a.hi_closed):
                    hi, hi_c = a.hi, a.hi_closed
                else:
                    hi, hi_c = b.hi, b.hi_closed
                if lo < hi:
                    out.append(Interval(lo, hi, lo_c, hi_c))
        return IntervalSet(out)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self.intervals + other.intervals)

    def contains_set(self, other: "IntervalSet", tol: float = 0.0) -> bool:
        """Whether every piece of ``other`` lies inside one piece of ``self``
        (endpoint comparisons relaxed by ``tol``)."""
        for b in other.intervals:
            if not any(a.lo <= b.lo + tol and b.hi <= a.hi + tol for a in self.intervals):
                return False
        return True

    def shift(self, delta: float) -> "IntervalSet":
        return IntervalSet(Interval(iv.lo + delta, iv.hi + delta, iv.lo_closed, iv.hi_closed) for iv in self.intervals)

    def distance_to_boundary(self, z: float) -> float:
        ends = self.endpoints()
        return min((abs(z - e) for e in ends), default=math.inf)
