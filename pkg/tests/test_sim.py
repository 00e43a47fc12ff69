"""Monte Carlo runs against analytic moments, exactly where possible."""

from __future__ import annotations

from fractions import Fraction

import pytest

from diffmech.sim import analytic_moments, compare, run_trials

F = Fraction


class TestRunTrials:
    def test_same_seed_same_stats(self, example2):
        sc, reports = example2
        a = run_trials(sc, reports, "pev", 2000, seed=9)
        b = run_trials(sc, reports, "pev", 2000, seed=9)
        assert a == b

    def test_different_seed_different_draws(self, example2):
        sc, reports = example2
        a = run_trials(sc, reports, "pev", 2000, seed=1)
        b = run_trials(sc, reports, "pev", 2000, seed=2)
        assert a.agent_mean[9] != b.agent_mean[9]

    def test_empirical_moments_are_exact_rationals(self, example2):
        sc, reports = example2
        stats = run_trials(sc, reports, "pev", 1000, seed=0)
        assert isinstance(stats.agent_mean[9], F)
        assert stats.agent_mean[2] == 0  # conduit with zero payment everywhere

    def test_requester_variance_is_zero(self, example2):
        sc, reports = example2
        stats = run_trials(sc, reports, "pev", 5000, seed=4)
        assert stats.requester_variance == 0
        assert stats.requester_mean == F(4)

    def test_rejects_empty_run(self, example2):
        sc, reports = example2
        with pytest.raises(ValueError):
            run_trials(sc, reports, "pev", 0, seed=0)


class TestAnalyticMoments:
    def test_worked_example(self, example2):
        sc, reports = example2
        means, variances, req_mean, req_var = analytic_moments(sc, reports, "pev")
        assert means[9] == F(29, 10)
        assert variances[9] == F(16, 25)
        assert means[6] == F(1, 2) and variances[6] == 0
        assert req_mean == F(4) and req_var == 0

    def test_degenerate_mechanisms_have_no_randomness(self, figure1):
        sc, reports = figure1
        for mech in ("idm", "vcg"):
            _, variances, _, req_var = analytic_moments(sc, reports, mech)
            assert set(variances.values()) == {F(0)}
            assert req_var == 0


class TestCompare:
    def test_worked_example_within_bands(self, example2):
        sc, reports = example2
        stats = run_trials(sc, reports, "pev", 20_000, seed=7)
        result = compare(stats, *analytic_moments(sc, reports, "pev"))
        assert result.passed, result.render_text()

    def test_zero_variance_requires_exact_equality(self, figure1):
        sc, reports = figure1
        stats = run_trials(sc, reports, "idm", 500, seed=0)
        result = compare(stats, *analytic_moments(sc, reports, "idm"))
        assert result.passed
        assert all(row.ok for row in result.rows)

    def test_negative_control(self, example2):
        sc, reports = example2
        stats = run_trials(sc, reports, "pev", 20_000, seed=7)
        means, variances, req_mean, req_var = analytic_moments(sc, reports, "pev")
        means = dict(means)
        means[9] += 1  # corrupt one analytic mean; the band must catch it
        result = compare(stats, means, variances, req_mean, req_var)
        assert not result.passed

    def test_render_mentions_every_agent(self, example2):
        sc, reports = example2
        stats = run_trials(sc, reports, "pev", 1000, seed=3)
        text = compare(stats, *analytic_moments(sc, reports, "pev")).render_text()
        for i in example2[0].worker_ids:
            assert f"agent {i}:" in text
