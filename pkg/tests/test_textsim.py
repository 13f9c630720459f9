import random

import pytest
from hypothesis import given, strategies as st

from oracles import levenshtein_full_matrix
from spotcast.textsim import Ranked, levenshtein, similarity, validate_candidates

text = st.text(alphabet="abcde ", max_size=12)


def test_levenshtein_examples():
    assert levenshtein("", "abc") == 3
    assert levenshtein("same", "same") == 0
    assert levenshtein("kitten", "sitting") == 3


def test_levenshtein_matches_full_matrix_oracle():
    rng = random.Random(3)
    for _ in range(300):
        a = "".join(rng.choice("abc") for _ in range(rng.randint(0, 15)))
        b = "".join(rng.choice("abc") for _ in range(rng.randint(0, 15)))
        assert levenshtein(a, b) == levenshtein_full_matrix(a, b)


@given(text, text)
def test_levenshtein_symmetric_and_bounded(a, b):
    d = levenshtein(a, b)
    assert d == levenshtein(b, a)
    assert abs(len(a) - len(b)) <= d <= max(len(a), len(b))
    assert (d == 0) == (a == b)


@given(text, text, text)
def test_levenshtein_triangle(a, b, c):
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


def test_similarity_examples():
    assert similarity("abcd", "abcd") == 1.0
    assert similarity("abcd", "") == 0.0
    assert similarity("abcd", "abce") == pytest.approx(1 - 1 / 4)
    assert similarity("", "") == 1.0


@given(text, text)
def test_similarity_range(a, b):
    s = similarity(a, b)
    assert 0.0 <= s <= 1.0
    assert (s == 1.0) == (a == b)


def test_validate_candidates_examples():
    assert validate_candidates("cafe", [("a", "cafe"), ("b", "bar")], 0.5) == [Ranked("a", 1.0)]
    assert validate_candidates("cafe", [], 0.5) == []


def test_validate_candidates_matches_sort_filter_oracle():
    rng = random.Random(11)
    for _ in range(20):
        cands = [(f"id{rng.randint(0, 99):02d}{i}", "".join(rng.choice("abc") for _ in range(rng.randint(0, 6))))
                 for i in range(30)]
        query = "".join(rng.choice("abc") for _ in range(4))
        min_score, k = rng.choice([0.0, 0.25, 0.5]), rng.randint(1, 30)
        scored = [(cid, 1 - levenshtein_full_matrix(query, s) / max(len(query), len(s), 1))
                  for cid, s in cands]
        expected = sorted([x for x in scored if x[1] >= min_score], key=lambda x: (-x[1], x[0]))[:k]
        got = validate_candidates(query, cands, min_score, k)
        assert [(r.id, r.score) for r in got] == pytest.approx(expected)


@given(text, st.lists(st.tuples(st.text(alphabet="xyz", min_size=1, max_size=3), text), max_size=10),
       st.floats(0, 1), st.integers(1, 5))
def test_validate_candidates_sorted_subset(query, cands, min_score, k):
    out = validate_candidates(query, cands, min_score, k)
    assert len(out) <= k
    assert all(a.score >= b.score for a, b in zip(out, out[1:]))
    assert {r.id for r in out} <= {cid for cid, _ in cands}
    assert all(r.score >= min_score for r in out)


def test_validate_candidates_rejects_bad_arguments():
    with pytest.raises(ValueError):
        validate_candidates("q", [], 1.5)
    with pytest.raises(ValueError):
        validate_candidates("q", [], 0.5, 0)
