"""Database querying and match-vector encoding."""

import pytest

from hybridkm import (
    DsvTriple,
    ExtendedBeliefState,
    MatchResult,
    UnknownDomainError,
    encode_match,
    query,
)


def state_of(*triples):
    return ExtendedBeliefState(triples=tuple(DsvTriple(*t) for t in triples))


def test_query_filters_by_domain_constraints(db):
    state = state_of(("restaurant", "food", "italian"))
    result = query(db, state, "restaurant")
    assert {e.identity() for e in result.entries} == {"alpha bistro", "gamma grill"}


def test_query_conjunction_of_slots(db):
    state = state_of(("restaurant", "food", "italian"), ("restaurant", "area", "centre"))
    result = query(db, state, "restaurant")
    assert [e.identity() for e in result.entries] == ["alpha bistro"]
    assert result.booking_available


def test_query_ignores_other_domains_and_ruk(db):
    state = state_of(
        ("restaurant", "food", "italian"),
        ("hotel", "area", "west"),
        ("restaurant", "ruk", "alpha bistro"),
    )
    result = query(db, state, "restaurant")
    # the hotel constraint and the ruk triple play no part
    assert {e.identity() for e in result.entries} == {"alpha bistro", "gamma grill"}


def test_query_dontcare_matches_everything(db):
    state = state_of(("restaurant", "food", "dontcare"))
    assert query(db, state, "restaurant").count == 3


def test_query_normalizes_values(db):
    state = state_of(("restaurant", "name", "  Alpha   BISTRO "))
    assert [e.identity() for e in query(db, state, "restaurant").entries] == ["alpha bistro"]


def test_query_missing_slot_excludes_entry(db):
    # no restaurant row carries a "parking" slot, so constraining it matches nothing
    state = state_of(("restaurant", "parking", "yes"))
    result = query(db, state, "restaurant")
    assert result.count == 0
    assert not result.booking_available


def test_query_empty_state_returns_whole_table(db):
    result = query(db, ExtendedBeliefState(), "train")
    assert result.count == 2


def test_query_unknown_domain(db):
    with pytest.raises(UnknownDomainError):
        query(db, ExtendedBeliefState(), "attraction")


def test_booking_bit_requires_a_bookable_match(db):
    # gamma grill is the only italian in the north and is not bookable
    state = state_of(("restaurant", "food", "italian"), ("restaurant", "area", "north"))
    result = query(db, state, "restaurant")
    assert result.count == 1
    assert not result.booking_available


@pytest.mark.parametrize(
    "count,expected_bucket",
    [(0, 0), (1, 1), (2, 2), (3, 2), (4, 3), (7, 3), (100, 3)],
)
def test_encode_match_buckets(count, expected_bucket):
    vector = encode_match(count, booking_available=False)
    assert vector.bucket == expected_bucket
    assert len(vector.bits) == 5
    assert sum(vector.bits[:4]) == 1
    assert vector.bits[expected_bucket] == 1
    assert vector.bits[4] == 0


def test_encode_match_booking_bit():
    assert encode_match(2, booking_available=True).bits == (0, 0, 1, 0, 1)
    assert encode_match(0, booking_available=False).bits == (1, 0, 0, 0, 0)


def test_encode_match_accepts_match_result(db):
    result = query(db, state_of(("hotel", "parking", "yes")), "hotel")
    vector = encode_match(result)
    assert result.count == 2
    assert vector.bits == (0, 0, 1, 0, 1)
    with pytest.raises(ValueError):
        encode_match(result, booking_available=True)


def test_encode_match_custom_bounds():
    vector = encode_match(5, booking_available=False, bounds=(1, 4, 9))
    assert vector.bits == (0, 0, 1, 0, 0)
    assert encode_match(10, booking_available=True, bounds=(1, 4, 9)).bits == (0, 0, 0, 1, 1)


def test_encode_match_rejects_bad_input():
    with pytest.raises(ValueError):
        encode_match(-1, booking_available=False)
    with pytest.raises(ValueError):
        encode_match(1, booking_available=False, bounds=(3, 1))
    with pytest.raises(ValueError):
        encode_match(1, booking_available=None)


def test_match_result_count_property(db):
    result = query(db, ExtendedBeliefState(), "restaurant")
    assert isinstance(result, MatchResult)
    assert result.count == len(result.entries) == 3
