"""Exact checks for the two-track shift machinery."""

import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fshil.symbolic import (
    BernoulliMeasure,
    Cylinder,
    SymbolSequence,
    count_periodic,
    cylinder_measure,
    distance,
    shift,
    shift_entropy,
)


def pair(halves, counts, k):
    return (
        SymbolSequence.periodic(halves, 0, 1),
        SymbolSequence.periodic(counts, 1, k),
    )


class TestShift:
    def test_rotates_periodic_pair(self):
        a = pair((0, 1), (2, 1), k=2)
        b = shift(a)
        assert [b[0][i] for i in range(4)] == [1, 0, 1, 0]
        assert [b[1][i] for i in range(4)] == [1, 2, 1, 2]

    def test_constant_sequence_is_fixed(self):
        c = SymbolSequence.periodic((1,), 0, 1)
        assert distance(shift(c), c) == 0.0

    def test_finite_prefix_loses_one_entry(self):
        p = SymbolSequence.finite([0, 1, 1, 0], 0, 1)
        q = shift(p)
        assert q.depth == 3
        assert [q[i] for i in range(3)] == [1, 1, 0]

    def test_period_m_word_returns_after_m_steps(self):
        for word in [(0,), (0, 1), (1, 1, 0), (0, 1, 1, 0)]:
            s = SymbolSequence.periodic(word, 0, 1)
            t = s
            for _ in range(len(word)):
                t = shift(t)
            assert distance(s, t) == 0.0

    def test_lazy_prefix_shift_defers_to_generator(self):
        calls = []

        def gen(i):
            calls.append(i)
            return (i + 1) % 2

        s = SymbolSequence.finite([0], 0, 1, gen=gen)
        t = shift(s)
        # entry i of the shift reads entry i+1 of the source
        assert t[0] == s[1]
        assert t[3] == s[4]


class TestDistance:
    def test_equal_periodic_is_zero(self):
        a = SymbolSequence.periodic((0, 1, 1), 0, 1)
        b = SymbolSequence.periodic((0, 1, 1, 0, 1, 1), 0, 1)
        assert distance(a, b) == 0.0

    def test_first_symbol_differs(self):
        a = SymbolSequence.periodic((0,), 0, 1)
        b = SymbolSequence.periodic((1,), 0, 1)
        assert distance(a, b) == 1.0

    def test_agree_through_index_three(self):
        a = SymbolSequence.finite([0, 1, 0, 1, 0], 0, 1)
        b = SymbolSequence.finite([0, 1, 0, 1, 1], 0, 1)
        assert distance(a, b) == 0.5**3

    def test_alphabet_mismatch_rejected(self):
        a = SymbolSequence.periodic((1,), 1, 2)
        b = SymbolSequence.periodic((1,), 1, 3)
        with pytest.raises(ValueError):
            distance(a, b)

    def test_ultrametric_on_random_triples(self):
        rng = random.Random(20260816)
        for _ in range(1000):
            n = rng.randint(1, 6)
            words = [
                tuple(rng.randint(1, 3) for _ in range(n)) for _ in range(3)
            ]
            a, b, c = (SymbolSequence.periodic(w, 1, 3) for w in words)
            assert distance(a, c) <= max(distance(a, b), distance(b, c)) + 0.0

    @given(
        st.lists(st.integers(0, 1), min_size=1, max_size=8),
        st.lists(st.integers(0, 1), min_size=1, max_size=8),
    )
    @settings(max_examples=200, deadline=None)
    def test_symmetry(self, wa, wb):
        a = SymbolSequence.periodic(wa, 0, 1)
        b = SymbolSequence.periodic(wb, 0, 1)
        assert distance(a, b) == distance(b, a)


class TestCylinderMeasure:
    def test_uniform_half_track_block(self):
        mu = BernoulliMeasure(half_p=(0.5, 0.5))
        c = Cylinder(start=0, half_word=(0, 1, 1))
        assert cylinder_measure(mu, c) == pytest.approx(1 / 8, abs=1e-15)

    def test_single_symbol_gives_its_probability(self):
        mu = BernoulliMeasure(half_p=(0.3, 0.7))
        assert cylinder_measure(mu, Cylinder(0, half_word=(0,))) == 0.3
        assert cylinder_measure(mu, Cylinder(0, half_word=(1,))) == 0.7

    def test_start_index_irrelevant(self):
        mu = BernoulliMeasure(half_p=(0.25, 0.75), count_p=(0.5, 0.3, 0.2))
        for start in (0, 1, 5, 40):
            c = Cylinder(start, half_word=(1, 0), count_word=(3, 1))
            assert cylinder_measure(mu, c) == pytest.approx(
                0.75 * 0.25 * 0.2 * 0.5, abs=1e-15
            )

    def test_multiplicative_over_concatenated_blocks(self):
        rng = random.Random(7)
        p = [rng.random() for _ in range(4)]
        z = sum(p)
        mu = BernoulliMeasure(count_p=tuple(v / z for v in p))
        for _ in range(50):
            w1 = tuple(rng.randint(1, 4) for _ in range(rng.randint(1, 5)))
            w2 = tuple(rng.randint(1, 4) for _ in range(rng.randint(1, 5)))
            joint = cylinder_measure(mu, Cylinder(0, count_word=w1 + w2))
            split = cylinder_measure(
                mu, Cylinder(0, count_word=w1)
            ) * cylinder_measure(mu, Cylinder(len(w1), count_word=w2))
            assert joint == pytest.approx(split, rel=1e-12)

    def test_symbol_outside_alphabet_rejected(self):
        mu = BernoulliMeasure(count_p=(0.5, 0.5))
        with pytest.raises(ValueError):
            cylinder_measure(mu, Cylinder(0, count_word=(3,)))

    def test_probability_vector_must_normalize(self):
        with pytest.raises(ValueError):
            BernoulliMeasure(half_p=(0.5, 0.6))


def brute_force_periodic(k: int, n: int) -> int:
    """Count n-blocks whose periodic extension is fixed by the n-fold shift."""
    alphabet = list(itertools.product(range(2), range(1, k + 1)))
    hits = 0
    for block in itertools.product(alphabet, repeat=n):
        halves = tuple(s[0] for s in block)
        counts = tuple(s[1] for s in block)
        a = pair(halves, counts, k)
        b = a
        for _ in range(n):
            b = shift(b)
        if distance(a[0], b[0]) == 0.0 and distance(a[1], b[1]) == 0.0:
            hits += 1
    return hits


class TestCounting:
    def test_small_closed_forms(self):
        assert count_periodic(1, 1) == 2
        assert count_periodic(2, 1) == 4
        assert count_periodic(2, 3) == 64

    def test_matches_enumeration_within_budget(self):
        for k in (1, 2, 3, 4):
            for n in (1, 2, 3, 4, 5, 6):
                if (2 * k) ** n > 10**4:
                    continue
                assert count_periodic(k, n) == brute_force_periodic(k, n)

    def test_rejects_degenerate_arguments(self):
        with pytest.raises(ValueError):
            count_periodic(0, 1)
        with pytest.raises(ValueError):
            count_periodic(1, 0)


class TestEntropy:
    def test_closed_form(self):
        assert shift_entropy(1) == pytest.approx(math.log(2), abs=1e-15)
        assert shift_entropy(2) == pytest.approx(math.log(4), abs=1e-15)

    def test_agrees_with_periodic_growth_rate(self):
        for k in (1, 2, 3):
            rate = math.log(count_periodic(k, 12)) / 12
            assert abs(shift_entropy(k) - rate) < 1e-12

    @given(st.integers(1, 50))
    @settings(max_examples=50, deadline=None)
    def test_monotone_in_alphabet(self, k):
        assert shift_entropy(k + 1) > shift_entropy(k)
