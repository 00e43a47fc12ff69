"""Rational parsing/printing and discrete quality distributions."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from diffmech.poq import (
    Pmf,
    RationalParseError,
    expectation,
    expected_welfare,
    format_rational,
    mixture,
    parse_rational,
    sample,
    validate_pmf,
)

F = Fraction

rationals = st.fractions(min_value=-5, max_value=5, max_denominator=48)


class TestParseRational:
    @pytest.mark.parametrize(
        "raw, want",
        [
            ("3/10", F(3, 10)),
            ("0.3", F(3, 10)),
            ("4", F(4)),
            (4, F(4)),
            ("-1/2", F(-1, 2)),
            (" 2/4 ", F(1, 2)),
            (F(7, 3), F(7, 3)),
        ],
    )
    def test_accepts(self, raw, want):
        assert parse_rational(raw) == want

    @pytest.mark.parametrize("raw", [0.3, True, False, None, "3/0", "abc", "1/2/3", ""])
    def test_rejects(self, raw):
        with pytest.raises(RationalParseError):
            parse_rational(raw)

    def test_float_rejection_names_the_reason(self):
        with pytest.raises(RationalParseError, match="float"):
            parse_rational(0.1)


class TestFormatRational:
    @pytest.mark.parametrize(
        "value, want",
        [(F(3, 10), "0.3"), (F(1, 3), "1/3"), (F(4), "4"), (F(-1, 10), "-0.1"), (F(0), "0")],
    )
    def test_known(self, value, want):
        assert format_rational(value) == want

    @given(rationals)
    def test_round_trips(self, x):
        assert parse_rational(format_rational(x)) == x


class TestValidatePmf:
    def test_ok(self):
        assert validate_pmf([(F(1), F(1, 2)), (F(2), F(1, 2))]) is None

    def test_sum_not_one(self):
        assert "total mass" in validate_pmf([(F(1), F(1, 3))])

    def test_negative_probability(self):
        msg = validate_pmf([(F(1), F(3, 2)), (F(2), F(-1, 2))])
        assert msg is not None

    def test_empty(self):
        assert validate_pmf([]) is not None

    def test_duplicate_quality(self):
        msg = validate_pmf([(F(1), F(1, 2)), (F(1), F(1, 2))])
        assert msg is not None


class TestPmf:
    def test_from_pairs_parses_and_sorts(self):
        p = Pmf.from_pairs([("2", "0.5"), ("1/1", "1/2")])
        assert p.support == (F(1), F(2))
        assert p.probability(F(2)) == F(1, 2)
        assert p.probability(F(7)) == 0

    def test_point_mass(self):
        p = Pmf.point_mass("3/2")
        assert p.is_point_mass_at(F(3, 2))
        assert not p.is_point_mass_at(F(1))
        assert expectation(p) == F(3, 2)

    def test_invalid_raises(self):
        with pytest.raises(ValueError):
            Pmf.from_pairs([(1, "1/3")])

    def test_expectation_and_welfare(self):
        p = Pmf.from_pairs([(8, "0.8"), (10, "0.2")])
        assert expectation(p) == F(42, 5)
        assert expected_welfare(p, F(1)) == F(37, 5)


@st.composite
def pmfs(draw):
    n = draw(st.integers(1, 4))
    support = draw(
        st.lists(
            st.fractions(min_value=0, max_value=8, max_denominator=8),
            min_size=n, max_size=n, unique=True,
        )
    )
    weights = draw(st.lists(st.integers(1, 5), min_size=n, max_size=n))
    total = sum(weights)
    return Pmf.from_pairs([(q, F(w, total)) for q, w in zip(support, weights)])


class TestSampling:
    def test_deterministic_for_a_seed(self):
        p = Pmf.from_pairs([(1, "1/3"), (2, "1/3"), (3, "1/3")])
        a = [sample(p, random.Random(7)) for _ in range(5)]
        b = [sample(p, random.Random(7)) for _ in range(5)]
        assert a == b

    @given(pmfs(), st.integers(0, 2**32))
    def test_sample_lands_in_support(self, p, seed):
        assert sample(p, random.Random(seed)) in p.support

    def test_frequencies_track_probabilities(self):
        p = Pmf.from_pairs([(0, "0.5"), (1, "0.3"), (2, "0.2")])
        rng = random.Random(123)
        n = 20_000
        counts = {q: 0 for q in p.support}
        for _ in range(n):
            counts[sample(p, rng)] += 1
        for q, prob in p.points:
            # 4 standard errors of a Bernoulli(prob) mean
            se = (float(prob) * (1 - float(prob)) / n) ** 0.5
            assert abs(counts[q] / n - float(prob)) < 4 * se

    def test_point_mass_sampling_is_constant(self):
        p = Pmf.point_mass(5)
        rng = random.Random(0)
        assert all(sample(p, rng) == 5 for _ in range(50))


class TestMixture:
    def test_two_point_masses(self):
        m = mixture([(F(1, 4), Pmf.point_mass(0)), (F(3, 4), Pmf.point_mass(4))])
        assert m.probability(F(0)) == F(1, 4)
        assert m.probability(F(4)) == F(3, 4)

    @given(pmfs(), pmfs(), st.integers(1, 9))
    def test_expectation_is_linear(self, p, q, k):
        w = F(k, 10)
        m = mixture([(w, p), (1 - w, q)])
        assert expectation(m) == w * expectation(p) + (1 - w) * expectation(q)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            mixture([(F(1, 2), Pmf.point_mass(1))])
