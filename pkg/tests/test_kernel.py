"""Kernel backends against the reference mechanisms, and against each other.

The kernel reimplements the allocation + expected-payoff pipeline on scaled
integers for the audit hot loop. Everything here cross-checks it against
the Fraction reference path, which shares no code with it past the Scenario
type.
"""

from __future__ import annotations

import dataclasses
import os
import random
import subprocess
import sys
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from diffmech import _kernel
from diffmech.mechanisms import expected_utilities, pev_allocate, qaidm_allocate
from diffmech.network import AgentType, Report, Scenario
from diffmech.poq import Pmf
from diffmech.scenario_io import generate_scenario

F = Fraction

compiled_only = pytest.mark.skipif(
    _kernel.backend_name() != "compiled", reason="compiled backend not built"
)


def _perturbed_profiles(scenario, seed):
    """Truth plus a few legal unilateral perturbations, deterministically."""
    rng = random.Random(seed)
    truth = scenario.truthful_reports()
    yield truth
    ids = scenario.worker_ids
    victim = rng.choice(ids)
    nilled = dict(truth)
    nilled[victim] = None
    yield nilled
    victim = rng.choice(ids)
    rep = truth[victim]
    pricier = dict(truth)
    pricier[victim] = Report(rep.pmf, rep.cost + F(1, 10), rep.invited)
    yield pricier
    victim = rng.choice(ids)
    rep = truth[victim]
    kept = frozenset(v for v in rep.invited if rng.random() < 0.5)
    shy = dict(truth)
    shy[victim] = Report(rep.pmf, rep.cost, kept)
    yield shy


@given(st.integers(0, 150))
def test_matches_reference_expected_utilities(seed):
    sc = generate_scenario(1 + seed % 9, n_levels=1 + seed % 3, density=0.35, seed=seed)
    extras = [F(1, 10)]
    inst = _kernel.compile_instance(sc, extra=extras)
    for reports in _perturbed_profiles(sc, seed):
        prof = _kernel.compile_profile(inst, reports)
        for mech_name, mech_code, allocate in (
            ("pev", _kernel.MECH_PEV, pev_allocate),
            ("qaidm", _kernel.MECH_QAIDM, qaidm_allocate),
        ):
            outcome = allocate(sc, reports)
            utils, _ = expected_utilities(sc, reports, outcome)
            for agent in sc.worker_ids:
                got = _kernel.agent_utility(inst, prof, agent, mech_code)
                assert got == utils[agent], (mech_name, agent)


@compiled_only
@given(st.integers(0, 150))
def test_pure_and_compiled_agree(seed):
    sc = generate_scenario(1 + seed % 9, n_levels=1 + seed % 3, density=0.35, seed=seed)
    inst = _kernel.compile_instance(sc, extra=[F(1, 10)])
    assert inst.compiled_ok
    pure = dataclasses.replace(inst, compiled_ok=False)
    for reports in _perturbed_profiles(sc, seed):
        prof = _kernel.compile_profile(inst, reports)
        for mech in (_kernel.MECH_PEV, _kernel.MECH_QAIDM):
            for agent in sc.worker_ids:
                assert _kernel.agent_utility(inst, prof, agent, mech) == _kernel.agent_utility(
                    pure, prof, agent, mech
                )


class TestScan:
    def _setup(self, example2):
        sc, reports = example2
        inst = _kernel.compile_instance(sc)
        prof = _kernel.compile_profile(inst, reports)
        return sc, reports, inst, prof

    def test_scan_matches_pointwise_evaluation(self, example2):
        sc, reports, inst, prof = self._setup(example2)
        agent = 6
        devs = []
        rep = reports[agent]
        for cost in (rep.cost, F(0), F(2), F(31, 10)):
            devs.append(_kernel.encode_report(inst, agent, Report(rep.pmf, cost, rep.invited)))
        devs.append(_kernel.encode_report(inst, agent, None))
        best_j, best_u = _kernel.scan_deviations(inst, prof, agent, _kernel.MECH_PEV, devs)
        single = []
        for d in devs:
            trial = dataclasses.replace(
                prof,
                out=list(prof.out),
                welf=list(prof.welf),
                expq=list(prof.expq),
            )
            k = inst.index[agent]
            out, nil, welf, expq = d
            trial.out[k] = out
            trial.welf[k] = welf
            trial.expq[k] = expq
            trial.nilm = (prof.nilm & ~(1 << k)) | (nil << k)
            single.append(_kernel.agent_utility(inst, trial, agent, _kernel.MECH_PEV))
        assert best_u == max(single)
        assert best_j == single.index(max(single))

    def test_scan_restores_the_profile(self, example2):
        sc, reports, inst, prof = self._setup(example2)
        before = (list(prof.out), prof.nilm, list(prof.welf), list(prof.expq))
        devs = [_kernel.encode_report(inst, 2, None)]
        _kernel.scan_deviations(inst, prof, 2, _kernel.MECH_PEV, devs)
        assert (list(prof.out), prof.nilm, list(prof.welf), list(prof.expq)) == before

    def test_first_index_wins_ties(self, example2):
        sc, reports, inst, prof = self._setup(example2)
        truth_enc = _kernel.encode_report(inst, 9, reports[9])
        best_j, _ = _kernel.scan_deviations(
            inst, prof, 9, _kernel.MECH_PEV, [truth_enc, truth_enc]
        )
        assert best_j == 0


class TestLimits:
    def test_too_many_workers(self):
        sc = generate_scenario(64, n_levels=2, density=0.1, seed=0)
        with pytest.raises(_kernel.KernelUnavailable):
            _kernel.compile_instance(sc)

    def test_off_scale_value(self):
        sc = generate_scenario(3, n_levels=2, density=0.3, seed=1)
        inst = _kernel.compile_instance(sc)
        with pytest.raises(_kernel.KernelUnavailable):
            inst.scaled(F(1, 9999991))

    def test_huge_values_fall_back_to_pure_and_stay_exact(self):
        big = F(10**15)
        sc = Scenario(
            requester_neighbors=frozenset({1}),
            agents={
                1: AgentType(Pmf.point_mass(big), F(1, 3), frozenset({2})),
                2: AgentType(Pmf.point_mass(big), F(1, 7), frozenset()),
            },
            quality_levels=frozenset({big}),
        )
        inst = _kernel.compile_instance(sc)
        assert not inst.compiled_ok
        reports = sc.truthful_reports()
        prof = _kernel.compile_profile(inst, reports)
        outcome = pev_allocate(sc, reports)
        utils, _ = expected_utilities(sc, reports, outcome)
        for agent in (1, 2):
            assert _kernel.agent_utility(inst, prof, agent, _kernel.MECH_PEV) == utils[agent]

    def test_nil_encodes_to_nothing(self, example2):
        sc, _ = example2
        inst = _kernel.compile_instance(sc)
        assert _kernel.encode_report(inst, 3, None) == (0, 1, 0, 0)


def test_env_override_forces_pure_backend():
    code = "from diffmech._kernel import backend_name; print(backend_name())"
    out = subprocess.run(
        [sys.executable, "-c", code],
        env={**os.environ, "DIFFMECH_PURE": "1"},
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "pure"
