"""Diffusion graphs, reachability, and critical sequences.

The critical sequence is computed by node deletion (who disconnects the
target) plus a dominance-count ordering; `critical_set_by_paths` recomputes
membership as the intersection of every simple root-to-target path. The two
must agree everywhere, and every prefix member must cut off every later one.
"""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from diffmech.network import (
    REQUESTER,
    AgentType,
    Report,
    Scenario,
    ScenarioError,
    build_graph,
    candidates,
    critical_sequence,
    critical_set_by_paths,
    participants,
    reachable,
    validate_reports,
    without_agent,
)
from diffmech.poq import Pmf
from diffmech.scenario_io import generate_scenario

F = Fraction


def _mini(neighbors_by_agent, root, cost=F(1, 2)):
    agents = {
        i: AgentType(pmf=Pmf.point_mass(1), cost=cost, neighbors=frozenset(nbrs))
        for i, nbrs in neighbors_by_agent.items()
    }
    return Scenario(
        requester_neighbors=frozenset(root),
        agents=agents,
        quality_levels=frozenset({F(1)}),
    )


class TestScenarioValidation:
    def test_unknown_requester_neighbor(self):
        with pytest.raises(ScenarioError, match="requester neighbor"):
            _mini({1: frozenset()}, root={1, 2})

    def test_self_neighbor(self):
        with pytest.raises(ScenarioError, match="contains itself"):
            _mini({1: frozenset({1})}, root={1})

    def test_unknown_neighbor(self):
        with pytest.raises(ScenarioError, match="unknown neighbor"):
            _mini({1: frozenset({9})}, root={1})

    def test_negative_cost(self):
        with pytest.raises(ScenarioError, match="negative cost"):
            _mini({1: frozenset()}, root={1}, cost=F(-1))

    def test_pmf_outside_levels(self):
        with pytest.raises(ScenarioError, match="not in quality_levels"):
            Scenario(
                requester_neighbors=frozenset({1}),
                agents={1: AgentType(Pmf.point_mass(2), F(0), frozenset())},
                quality_levels=frozenset({F(1)}),
            )

    def test_requester_sentinel_is_a_legal_neighbor(self):
        sc = _mini({1: frozenset({REQUESTER})}, root={1})
        assert REQUESTER in sc.agents[1].neighbors


class TestReportValidation:
    def test_invite_outside_true_neighbors(self):
        sc = _mini({1: frozenset({2}), 2: frozenset()}, root={1})
        bad = {1: Report(Pmf.point_mass(1), F(0), frozenset({2})), 2: None}
        validate_reports(sc, bad)  # 2 is a true neighbor: fine
        worse = {2: Report(Pmf.point_mass(1), F(0), frozenset({1}))}
        with pytest.raises(ScenarioError, match="outside true neighbor set"):
            validate_reports(sc, worse)

    def test_unknown_agent(self):
        sc = _mini({1: frozenset()}, root={1})
        with pytest.raises(ScenarioError, match="unknown agent 9"):
            validate_reports(sc, {9: None})


class TestGraph:
    def test_nil_agent_relays_nothing(self):
        # s -> 1 -> 2; with 1 nil, 2 is unreachable
        sc = _mini({1: frozenset({2}), 2: frozenset()}, root={1})
        truth = sc.truthful_reports()
        g = build_graph(sc, truth)
        assert participants(g) == {1, 2}
        silenced = without_agent(truth, 1)
        g2 = build_graph(sc, silenced)
        assert participants(g2) == {1}

    def test_nil_agent_is_not_a_candidate(self):
        sc = _mini({1: frozenset({2}), 2: frozenset()}, root={1})
        prof = without_agent(sc.truthful_reports(), 1)
        g = build_graph(sc, prof)
        assert 1 in participants(g)
        assert candidates(g, prof) == frozenset()

    def test_withholding_an_invitation_prunes_reach(self):
        sc = _mini({1: frozenset({2, 3}), 2: frozenset(), 3: frozenset()}, root={1})
        prof = dict(sc.truthful_reports())
        prof[1] = Report(prof[1].pmf, prof[1].cost, frozenset({2}))
        g = build_graph(sc, prof)
        assert participants(g) == {1, 2}

    def test_reachable_with_removed_node(self):
        sc = _mini({1: frozenset({2}), 2: frozenset({3}), 3: frozenset()}, root={1})
        g = build_graph(sc, sc.truthful_reports())
        assert reachable(g, removed=[2]) == {1}

    def test_without_agent_rejects_strangers(self):
        sc = _mini({1: frozenset()}, root={1})
        with pytest.raises(ScenarioError):
            without_agent(sc.truthful_reports(), 5)


class TestCriticalSequence:
    def test_chain(self):
        sc = _mini({1: frozenset({2}), 2: frozenset({3}), 3: frozenset()}, root={1})
        g = build_graph(sc, sc.truthful_reports())
        seq = critical_sequence(g, 3)
        assert seq.order == (REQUESTER, 1, 2, 3)
        assert seq.members == (1, 2, 3)

    def test_diamond_has_no_interior_critical_agent(self):
        # s -> 1,2 -> 3: neither 1 nor 2 alone cuts 3 off
        sc = _mini(
            {1: frozenset({3}), 2: frozenset({3}), 3: frozenset()}, root={1, 2}
        )
        g = build_graph(sc, sc.truthful_reports())
        seq = critical_sequence(g, 3)
        assert seq.order == (REQUESTER, 3)

    def test_unreachable_target(self):
        sc = _mini({1: frozenset(), 2: frozenset()}, root={1})
        g = build_graph(sc, sc.truthful_reports())
        with pytest.raises(ScenarioError, match="not reachable"):
            critical_sequence(g, 2)

    def test_example2_sequence(self, example2):
        sc, reports = example2
        g = build_graph(sc, reports)
        assert critical_sequence(g, 9).order == (REQUESTER, 2, 6, 9)
        assert critical_set_by_paths(g, 9) == {2, 6, 9}

    @given(st.integers(0, 199))
    def test_node_deletion_matches_path_intersection(self, seed):
        sc = generate_scenario(2 + seed % 7, n_levels=2, density=0.35, seed=seed)
        reports = sc.truthful_reports()
        g = build_graph(sc, reports)
        for target in sorted(candidates(g, reports)):
            seq = critical_sequence(g, target)
            assert frozenset(seq.members) == critical_set_by_paths(g, target)

    @given(st.integers(0, 199))
    def test_prefix_members_cut_off_suffix_members(self, seed):
        sc = generate_scenario(2 + seed % 7, n_levels=2, density=0.35, seed=seed)
        reports = sc.truthful_reports()
        g = build_graph(sc, reports)
        for target in sorted(candidates(g, reports)):
            order = critical_sequence(g, target).order
            workers = [v for v in order if v is not REQUESTER]
            for k, cut in enumerate(workers[:-1]):
                rest = reachable(g, removed=[cut])
                assert all(later not in rest for later in workers[k + 1 :])

    @given(st.integers(0, 199))
    def test_members_are_candidates(self, seed):
        sc = generate_scenario(2 + seed % 7, n_levels=2, density=0.35, seed=seed)
        reports = sc.truthful_reports()
        g = build_graph(sc, reports)
        cand = candidates(g, reports)
        for target in sorted(cand):
            assert frozenset(critical_sequence(g, target).members) <= cand
