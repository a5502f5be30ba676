from __future__ import annotations

import itertools
import math
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from phi4zero.combinatorics import (
    enumerate_pair_partitions,
    enumerate_triple_partitions,
    level_table,
    multinomial_weight,
    symmetry_factor,
)

odd_levels = st.integers(min_value=1, max_value=60).map(lambda k: 2 * k + 1)


def test_pairs_n3():
    (p,) = enumerate_pair_partitions(3)
    assert (p.j1, p.j2) == (1, 2) and p.weight == pytest.approx(3, rel=1e-14)


def test_pairs_n5_and_n9():
    pairs = enumerate_pair_partitions(5)
    assert [(p.j1, p.j2) for p in pairs] == [(1, 4), (3, 2)]
    assert [p.weight for p in pairs] == pytest.approx([5, 10], rel=1e-14)
    assert [(p.j1, p.j2) for p in enumerate_pair_partitions(9)] == [(1, 8), (3, 6), (5, 4), (7, 2)]


def test_triples_small_levels():
    (t,) = enumerate_triple_partitions(3)
    assert t.parts == (1, 1, 1) and t.sigma_sym == 6 and t.weight == pytest.approx(1, rel=1e-14)
    (t,) = enumerate_triple_partitions(5)
    assert t.parts == (1, 1, 3) and t.sigma_sym == 2 and t.weight == pytest.approx(10, rel=1e-14)
    assert [t.parts for t in enumerate_triple_partitions(7)] == [(1, 1, 5), (1, 3, 3)]


@pytest.mark.parametrize("parts, expected", [((1, 1, 1), 6), ((1, 1, 3), 2), ((1, 3, 5), 1), ((3, 1, 3), 2)])
def test_symmetry_factor(parts, expected):
    assert symmetry_factor(parts) == expected


def test_symmetry_factor_needs_three_parts():
    with pytest.raises(ValueError):
        symmetry_factor((1, 1))


def test_multinomial_examples():
    assert multinomial_weight(3, [1, 2], 1) == pytest.approx(3, rel=1e-14)
    assert multinomial_weight(5, [1, 1, 3], 2) == pytest.approx(10, rel=1e-14)
    exact = Fraction(math.factorial(55), math.factorial(53) * 2)
    assert multinomial_weight(55, [1, 1, 53], 2) == pytest.approx(float(exact), rel=1e-12)


def test_multinomial_errors():
    with pytest.raises(ValueError):
        multinomial_weight(5, [1, 1, 1])
    with pytest.raises(ValueError):
        multinomial_weight(3, [1, 1, 1], 0)
    with pytest.raises(OverflowError):
        multinomial_weight(1001, [333, 333, 335], 2)


@pytest.mark.parametrize("bad", [2, 1, 0, -3, 10])
def test_invalid_levels(bad):
    with pytest.raises(ValueError):
        enumerate_pair_partitions(bad)
    with pytest.raises(ValueError):
        enumerate_triple_partitions(bad)


def test_non_integer_level():
    with pytest.raises(TypeError):
        enumerate_pair_partitions(5.0)


@given(odd_levels)
def test_pair_count_and_weights(n):
    pairs = enumerate_pair_partitions(n)
    assert len(pairs) == (n - 1) // 2
    assert all(p.j1 % 2 == 1 and p.j2 % 2 == 0 and p.j2 >= 2 and p.j1 + p.j2 == n for p in pairs)
    assert all(0 < p.weight < math.inf for p in pairs)
    assert [p.j1 for p in pairs] == sorted(p.j1 for p in pairs)


@given(odd_levels)
def test_triples_are_sorted_unique_multisets(n):
    triples = enumerate_triple_partitions(n)
    parts = [t.parts for t in triples]
    assert parts == sorted(parts)
    assert len(set(parts)) == len(parts)
    for t in triples:
        assert list(t.parts) == sorted(t.parts) and sum(t.parts) == n
        assert all(p % 2 == 1 for p in t.parts)
        assert t.sigma_sym in (1, 2, 6) and 0 < t.weight < math.inf


@pytest.mark.parametrize("n", range(3, 22, 2))
def test_unordered_sum_reproduces_ordered_sum(n):
    # a multiset with symmetry factor sigma has 3!/sigma orderings
    odd = range(1, n + 1, 2)
    ordered = sum(
        math.factorial(n) // (math.factorial(a) * math.factorial(b) * math.factorial(c))
        for a, b, c in itertools.product(odd, repeat=3)
        if a + b + c == n
    )
    unordered = sum(Fraction(round(t.weight)) for t in enumerate_triple_partitions(n))
    assert ordered == 6 * unordered


def test_level_table_matches_enumeration():
    tab = level_table(9)
    pairs = enumerate_pair_partitions(9)
    assert list(tab.pair_hi) == [p.j2 // 2 for p in pairs]
    assert list(tab.pair_lo) == [(p.j1 - 1) // 2 for p in pairs]
    assert not tab.pair_w.flags.writeable
    assert level_table(9) is tab


def test_brute_force_counts():
    for n in range(3, 32, 2):
        multisets = Counter(
            tuple(sorted(c)) for c in itertools.product(range(1, n + 1, 2), repeat=3) if sum(c) == n
        )
        assert len(enumerate_triple_partitions(n)) == len(multisets)
