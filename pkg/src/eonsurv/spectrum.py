"""Frequency-slot algebra for flexgrid links.

Slots are 1-based indices of fixed-width (12.5 GHz) spectrum units. A
connection owns a contiguous SlotRange; bookkeeping elsewhere deals in
arbitrary SlotSets. Ranges serialize as "lo-hi" in every file format.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Union


DEFAULT_CAPACITY = 40


class InvalidRange(ValueError):
    """Inverted, zero-width or out-of-bounds slot ranges."""


@dataclass(frozen=True, order=True)
class SlotRange:
    """Contiguous run of slots, inclusive on both ends."""

    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.lo < 1 or self.hi < self.lo:
            raise InvalidRange(f"bad slot range {self.lo}..{self.hi}")

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1

    def to_set(self) -> "SlotSet":
        return SlotSet(range(self.lo, self.hi + 1))

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.lo, self.hi + 1))

    def __contains__(self, slot: int) -> bool:
        return self.lo <= slot <= self.hi

    def __str__(self) -> str:
        return f"{self.lo}-{self.hi}"

    @classmethod
    def parse(cls, text: str) -> "SlotRange":
        parts = text.strip().split("-")
        if len(parts) == 1:
            lo = hi = int(parts[0])
        elif len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
        else:
            raise InvalidRange(f"cannot parse slot range {text!r}")
        return cls(lo, hi)


SlotsLike = Union["SlotSet", SlotRange, Iterable[int]]


def _members(slots: SlotsLike) -> frozenset:
    if isinstance(slots, SlotSet):
        return slots.members
    if isinstance(slots, SlotRange):
        return frozenset(range(slots.lo, slots.hi + 1))
    return frozenset(int(s) for s in slots)


class SlotSet:
    """Immutable set of slot indices with set algebra and run serialization."""

    __slots__ = ("members", "_order", "_mask")

    def __init__(self, slots: SlotsLike = ()):
        members = _members(slots)
        if any(s < 1 for s in members):
            raise InvalidRange("slot indices are 1-based")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "_order", None)
        object.__setattr__(self, "_mask", None)

    def __setattr__(self, name, value):
        raise AttributeError("SlotSet is immutable")

    def __eq__(self, other) -> bool:
        return isinstance(other, SlotSet) and self.members == other.members

    def __hash__(self) -> int:
        return hash(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __bool__(self) -> bool:
        return bool(self.members)

    def __contains__(self, slot: int) -> bool:
        return slot in self.members

    def __iter__(self) -> Iterator[int]:
        order = self._order
        if order is None:
            order = tuple(sorted(self.members))
            object.__setattr__(self, "_order", order)
        return iter(order)

    @property
    def mask(self) -> int:
        """The members as set bits, for callers doing bitwise algebra."""
        m = self._mask
        if m is None:
            m = 0
            for s in self.members:
                m |= 1 << s
            object.__setattr__(self, "_mask", m)
        return m

    def __and__(self, other: SlotsLike) -> "SlotSet":
        return SlotSet(self.members & _members(other))

    def __or__(self, other: SlotsLike) -> "SlotSet":
        return SlotSet(self.members | _members(other))

    def __sub__(self, other: SlotsLike) -> "SlotSet":
        return SlotSet(self.members - _members(other))

    def isdisjoint(self, other: SlotsLike) -> bool:
        return self.members.isdisjoint(_members(other))

    def issubset(self, other: SlotsLike) -> bool:
        return self.members <= _members(other)

    def runs(self) -> list[SlotRange]:
        """Decompose into maximal contiguous ranges, ascending."""
        out: list[SlotRange] = []
        run_lo = run_hi = None
        for s in sorted(self.members):
            if run_hi is not None and s == run_hi + 1:
                run_hi = s
            else:
                if run_lo is not None:
                    out.append(SlotRange(run_lo, run_hi))
                run_lo = run_hi = s
        if run_lo is not None:
            out.append(SlotRange(run_lo, run_hi))
        return out

    def __str__(self) -> str:
        return ",".join(str(r) for r in self.runs())

    def __repr__(self) -> str:
        return f"SlotSet({str(self) or ''!r})"

    @classmethod
    def parse(cls, text: str) -> "SlotSet":
        text = text.strip()
        if not text:
            return cls()
        members: set[int] = set()
        for chunk in text.split(","):
            r = SlotRange.parse(chunk)
            members.update(range(r.lo, r.hi + 1))
        return cls(members)


def make_range(lo: int, hi: int) -> SlotRange:
    return SlotRange(lo, hi)


def overlaps(a: SlotsLike, b: SlotsLike) -> bool:
    return not _members(a).isdisjoint(_members(b))


def first_fit(occupied: SlotsLike, demand: int, capacity: int = DEFAULT_CAPACITY) -> Optional[SlotRange]:
    """Lowest contiguous free range of `demand` slots within [1, capacity].

    Returns None when nothing fits (no-fit is a value, not an error).
    """
    if demand < 1:
        raise InvalidRange("demand must be at least one slot")
    taken = _members(occupied)
    run = 0
    for slot in range(1, capacity + 1):
        run = 0 if slot in taken else run + 1
        if run == demand:
            return SlotRange(slot - demand + 1, slot)
    return None
