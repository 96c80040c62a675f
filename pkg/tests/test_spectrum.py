"""Slot algebra: range validity, set ops, first-fit against a brute-force oracle."""
from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from eonsurv.spectrum import (
    InvalidRange,
    SlotRange,
    SlotSet,
    first_fit,
    make_range,
    overlaps,
)


def brute_force_first_fit(occupied: set[int], demand: int, capacity: int):
    """Independent oracle: scan every start position, lowest wins."""
    for lo in range(1, capacity - demand + 2):
        if all(s not in occupied for s in range(lo, lo + demand)):
            return (lo, lo + demand - 1)
    return None


def test_make_range_basic():
    r = make_range(1, 10)
    assert r.lo == 1 and r.hi == 10
    assert r.width == 10
    assert list(r) == list(range(1, 11))


def test_singleton_range():
    r = make_range(5, 5)
    assert r.width == 1
    assert list(r.to_set()) == [5]


def test_invalid_ranges():
    with pytest.raises(InvalidRange):
        make_range(10, 1)
    with pytest.raises(InvalidRange):
        make_range(0, 3)
    with pytest.raises(InvalidRange):
        make_range(-2, -1)


def test_range_serialization_round_trip():
    assert str(make_range(1, 10)) == "1-10"
    assert str(make_range(4, 4)) == "4-4"
    assert SlotRange.parse("1-10") == make_range(1, 10)
    assert SlotRange.parse("7") == make_range(7, 7)


def test_slotset_ops():
    a = SlotSet(range(1, 11))
    b = make_range(4, 10).to_set()
    assert len(a) == 10
    assert (a & b) == SlotSet(range(4, 11))
    assert (a | b) == a
    assert (a - b) == SlotSet({1, 2, 3})
    assert 4 in a and 11 not in a


def test_slotset_serialization():
    s = SlotSet({1, 2, 3, 7, 9, 10})
    assert str(s) == "1-3,7-7,9-10"
    assert SlotSet.parse("1-3,7,9-10") == s
    assert SlotSet.parse("") == SlotSet()


def test_slotset_rejects_nonpositive():
    with pytest.raises(InvalidRange):
        SlotSet({0, 1})


def test_overlaps():
    assert overlaps(make_range(1, 10), make_range(4, 10))
    assert overlaps(make_range(1, 3), SlotSet({3}))
    assert not overlaps(make_range(1, 3), make_range(4, 6))
    assert not overlaps(SlotSet(), make_range(1, 40))


def test_first_fit_frozen_example():
    # occupied 1-10, demand 3 on a 40-slot link lands at 11-13
    got = first_fit(make_range(1, 10), 3, capacity=40)
    assert got == make_range(11, 13)


def test_first_fit_no_fit_is_value():
    assert first_fit(make_range(1, 39), 2, capacity=40) is None
    assert first_fit(SlotSet(), 41, capacity=40) is None


def test_first_fit_prefers_lowest():
    occupied = SlotSet({3, 4, 9})
    assert first_fit(occupied, 2, capacity=16) == make_range(1, 2)
    assert first_fit(occupied, 4, capacity=16) == make_range(5, 8)


@given(
    occupied=st.sets(st.integers(min_value=1, max_value=40), max_size=40),
    demand=st.integers(min_value=1, max_value=12),
    capacity=st.integers(min_value=1, max_value=40),
)
def test_first_fit_matches_oracle(occupied, demand, capacity):
    got = first_fit(SlotSet(occupied), demand, capacity)
    want = brute_force_first_fit(occupied, demand, capacity)
    if want is None:
        assert got is None
    else:
        assert got is not None and (got.lo, got.hi) == want
        # result is inside the governed band and disjoint from occupation
        assert got.lo >= 1 and got.hi <= capacity
        assert not overlaps(got, SlotSet(occupied & set(range(1, capacity + 1))))


@given(
    a=st.sets(st.integers(min_value=1, max_value=60), max_size=30),
    b=st.sets(st.integers(min_value=1, max_value=60), max_size=30),
)
def test_overlaps_symmetric_and_consistent(a, b):
    sa, sb = SlotSet(a), SlotSet(b)
    assert overlaps(sa, sb) == overlaps(sb, sa)
    assert overlaps(sa, sb) == bool(sa & sb)


@given(st.sets(st.integers(min_value=1, max_value=80), min_size=0, max_size=40))
def test_slotset_run_round_trip(members):
    s = SlotSet(members)
    assert SlotSet.parse(str(s)) == s
    total = sum(r.width for r in s.runs())
    assert total == len(s)
