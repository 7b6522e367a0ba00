import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aqsteer.errors import InvalidInputError, ScenarioTooLargeError
from aqsteer.words import (EMPTY, NULL, Letter, Scenario, Word, canonicalize, dagger_key,
                           generate_aq_words, is_aq_word, is_null, parse_word, product_key)

import oracles

S2 = Scenario(2, 2, 2)
S3 = Scenario(3, 3, 3)


def w(*letters):
    return Word(tuple(Letter(*l) for l in letters))


def test_cross_party_letters_commute():
    # letters given as (party, input, output)
    assert canonicalize([(2, 1, 0), (1, 0, 1)], S2) == w((1, 0, 1), (2, 1, 0))


def test_repeated_letter_collapses():
    assert canonicalize([(1, 0, 0), (1, 0, 0)], S2) == w((1, 0, 0))


def test_empty_sequence_is_empty_word():
    assert canonicalize([], S2) == EMPTY
    assert len(EMPTY) == 0


def test_same_party_order_is_kept():
    assert canonicalize([(1, 1, 0), (1, 0, 0)], S2) == w((1, 1, 0), (1, 0, 0))


def test_out_of_range_letter_rejected():
    with pytest.raises(InvalidInputError):
        canonicalize([(3, 0, 0)], S2)
    with pytest.raises(InvalidInputError):
        canonicalize([(1, 2, 0)], S2)


def test_null_detection():
    assert is_null(w((1, 0, 0), (1, 0, 1)))
    assert not is_null(w((1, 0, 0), (1, 1, 1)))
    assert not is_null(EMPTY)


@pytest.mark.parametrize("n,a,x,expected", [(1, 2, 2, 5), (2, 2, 2, 25), (1, 1, 1, 2)])
def test_word_counts_match_enumeration(n, a, x, expected):
    assert oracles.count_aq_words(n, a, x) == expected
    assert len(generate_aq_words(Scenario(n, x, a))) == expected


def test_word_order_is_deterministic():
    words = generate_aq_words(S2)
    assert words[0] == EMPTY
    assert words[1] == w((1, 0, 0))
    assert words == generate_aq_words(Scenario(2, 2, 2))
    assert len(set(words)) == len(words)
    assert all(is_aq_word(v) for v in words)


def test_single_outcome_scenario():
    assert generate_aq_words(Scenario(1, 1, 1)) == [EMPTY, w((1, 0, 0))]


def test_word_cap():
    with pytest.raises(ScenarioTooLargeError):
        generate_aq_words(Scenario(4, 3, 3), cap=1000)


def test_product_key_examples():
    a = w((1, 0, 0))
    assert product_key(a, a) == a
    assert product_key(a, w((1, 0, 1))) is NULL
    b = w((2, 1, 1))
    assert product_key(a, b) == w((1, 0, 0), (2, 1, 1))
    assert product_key(a, b) == product_key(EMPTY, w((1, 0, 0), (2, 1, 1)))


def test_product_key_of_different_inputs_keeps_order():
    v, u = w((1, 0, 0)), w((1, 1, 0))
    assert product_key(v, u) == w((1, 0, 0), (1, 1, 0))
    assert product_key(u, v) == w((1, 1, 0), (1, 0, 0))


def test_word_text_round_trip():
    for v in generate_aq_words(S2):
        assert parse_word(str(v), S2) == v
    assert str(EMPTY) == "∅"
    assert str(w((1, 1, 0), (2, 0, 1))) == "0|1@1 . 1|0@2"


letters3 = st.tuples(st.integers(1, 3), st.integers(0, 2), st.integers(0, 2))
aq_words3 = generate_aq_words(S3)


@settings(max_examples=1000, deadline=None)
@given(st.lists(letters3, max_size=8))
def test_canonicalize_idempotent(raw):
    once = canonicalize(raw, S3)
    assert canonicalize(once.letters, S3) == once


@settings(max_examples=1000, deadline=None)
@given(st.sampled_from(aq_words3), st.sampled_from(aq_words3))
def test_product_key_symmetry(v, u):
    assert product_key(v, u) == dagger_key(product_key(u, v))


@settings(max_examples=1000, deadline=None)
@given(st.sampled_from(aq_words3), st.sampled_from(aq_words3))
def test_null_products_map_to_null_marker(v, u):
    raw = tuple(reversed(v.letters)) + u.letters
    if is_null(canonicalize(raw, S3)):
        assert product_key(v, u) is NULL


def test_counts_for_all_small_scenarios():
    for n, a, x in itertools.product(range(1, 4), range(1, 4), range(1, 4)):
        assert len(generate_aq_words(Scenario(n, x, a))) == oracles.count_aq_words(n, a, x)


def test_scenario_json_round_trip():
    s = Scenario(2, 3, 2, 4)
    assert Scenario.from_json(s.to_json()) == s
    assert s.to_json() == {"n_parties": 2, "n_inputs": 3, "n_outputs": 2, "bob_dim": 4}
