"""Acceptance gate: the nine behaviors this package is accountable for.

Every criterion prints exactly one `[criterion N] PASS/FAIL` line (visible
with `pytest tests/test_acceptance.py -v -s`) and enforces its stated time
bound. All numeric checks are exact rational equality unless the criterion
itself is statistical.
"""

from __future__ import annotations

import contextlib
import io
import time
from fractions import Fraction

import pytest

from diffmech.audit import (
    check_ic,
    check_ir,
    check_lemmas,
    check_wbb,
    expected_payoff_profile,
    replay_witness,
)
from diffmech.cli import main as cli_main
from diffmech.mechanisms import (
    efficient_allocation,
    expected_utilities,
    idm_run,
    payoff_schedule,
    pev_allocate,
    pev_payoffs,
    qaidm_allocate,
    uniform_quality,
)
from diffmech.micro import run_micro_suite
from diffmech.poq import expectation
from diffmech.scenario_io import generate_scenario, load_bundled
from diffmech.sim import analytic_moments, compare, run_trials

F = Fraction


@contextlib.contextmanager
def criterion(num: int, label: str, bound: float | None = None):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[criterion {num}] FAIL - {label}")
        raise
    elapsed = time.perf_counter() - t0
    if bound is not None and elapsed >= bound:
        print(f"[criterion {num}] FAIL - {label}: {elapsed:.2f}s over the {bound:g}s bound")
        raise AssertionError(f"criterion {num} exceeded its time bound")
    print(f"[criterion {num}] PASS - {label} ({elapsed:.2f}s)")


def _quiet_cli(argv) -> int:
    with contextlib.redirect_stdout(io.StringIO()):
        return cli_main(argv)


# 200 small scenarios shared by criteria 3 and 8
def _suite_scenarios():
    out = []
    for k in range(200):
        out.append(
            generate_scenario(
                1 + k % 9, n_levels=1 + k % 4, density=0.2 + (k % 3) * 0.15, seed=k
            )
        )
    return out


def _degenerate_scenarios():
    return [
        generate_scenario(
            1 + k % 9, n_levels=1 + k % 3, density=0.3, seed=1000 + k, degenerate=True
        )
        for k in range(50)
    ]


@pytest.fixture(scope="module")
def suite_scenarios():
    return _suite_scenarios()


@pytest.fixture(scope="module")
def degenerate_scenarios():
    return _degenerate_scenarios()


def test_criterion_1_worked_example_exact():
    """10-agent network: w values, selection, payments, utilities — exact."""
    with criterion(1, "10-agent worked example reproduced exactly", bound=1.0):
        sc, reports = load_bundled("example2")
        out = pev_allocate(sc, reports)
        assert out.selected == 9
        assert out.welfare_without == {2: F(4), 6: F(4), 9: F(9, 2)}
        vec = pev_payoffs(out, F(8))
        assert (vec.payments[2], vec.payments[6], vec.payments[9]) == (0, F(1, 2), F(7, 2))
        cost9 = sc.agents[9].cost
        assert (vec.payments[2], vec.payments[6], vec.payments[9] - cost9) == (
            0, F(1, 2), F(5, 2),
        )
        assert vec.requester_utility == F(4)
        assert _quiet_cli(["demo", "example2"]) == 0


def test_criterion_2_vcg_deficit_exact():
    """7-agent degenerate network: the VCG baseline runs a 0.1 deficit."""
    with criterion(2, "degenerate-network VCG payments reproduced exactly", bound=1.0):
        sc, reports = load_bundled("figure1")
        _, at = payoff_schedule(sc, reports, "vcg")
        vec = at(F(1))
        assert vec.payments[1] == F(1, 2)
        assert vec.payments[4] == F(3, 5)
        assert vec.requester_utility == F(-1, 10)
        assert _quiet_cli(["demo", "example1"]) == 0


def test_criterion_3_property_suite(suite_scenarios):
    """IR, the budget identity, and both payoff lemmas on 200 random scenarios."""
    with criterion(3, "IR + WBB identity + lemmas hold on 200 scenarios", bound=60.0):
        for sc in suite_scenarios:
            for report in (check_ir(sc, "pev"), check_wbb(sc, "pev"), check_lemmas(sc)):
                assert report.verdict == "holds", report.render_text()


def test_criterion_4_exhaustive_micro_suite():
    """Full type-space deviation enumeration on every tiny scenario."""
    with criterion(4, "exhaustive micro-suite finds no profitable deviation", bound=600.0):
        result = run_micro_suite(seed=0)
        assert result.ok, result.witness
        assert result.scenarios > 7000
        assert result.deviations > 800_000


def test_criterion_5_quality_aware_variant_fails_ic():
    """The quality-aware payment rule is gameable, with a replayable witness."""
    with criterion(5, "quality-aware variant caught with a replayable witness", bound=5.0):
        sc, _ = load_bundled("qaidm_failure")
        report = check_ic(sc, "qaidm")
        assert report.verdict == "violated"
        w = report.witness
        assert w is not None and w.gain > 0
        assert replay_witness(sc, "qaidm", w) == (w.truthful_utility, w.deviant_utility)
        # the lie's cost lands on the requester at the low realization
        reports = dict(sc.truthful_reports()) if w.context is None else dict(w.context)
        reports[w.agent] = w.deviation
        selected, at = payoff_schedule(sc, reports, "qaidm")
        assert selected is not None
        q_low = min(sc.agents[selected].pmf.support)
        assert at(q_low).requester_utility < 0


def test_criterion_6_efficiency_gap_exact():
    """Two-agent chain: the conduit is selected; the gap is exactly 3/10."""
    with criterion(6, "efficiency traded for IR+IC+WBB, gap exactly 3/10", bound=1.0):
        sc, reports = load_bundled("figure5")
        out = pev_allocate(sc, reports)
        assert out.selected == 1
        eff = efficient_allocation(sc, reports)
        assert eff.allocation.selected == 2
        achieved = expectation(reports[1].pmf) - reports[1].cost
        assert eff.welfare - achieved == F(3, 10)
        assert pev_payoffs(out, F(1)).requester_utility == 0
        assert _quiet_cli(["demo", "prop1"]) == 0


def test_criterion_7_degenerate_reduction(degenerate_scenarios):
    """PEV and IDM agree outcome-for-outcome on 50 uniform-quality scenarios."""
    with criterion(7, "pev = idm on 50 degenerate scenarios, bit for bit", bound=10.0):
        for sc in degenerate_scenarios:
            reports = sc.truthful_reports()
            q0 = uniform_quality(sc)
            idm_out, idm_vec = idm_run(sc, reports, q0)
            pev_out = pev_allocate(sc, reports)
            assert pev_out.selected == idm_out.selected
            assert pev_out.welfare_without == idm_out.welfare_without
            if pev_out.is_null:
                assert idm_vec.requester_utility == 0
            else:
                assert pev_out.sequence == idm_out.sequence
                assert pev_payoffs(pev_out, q0) == idm_vec


def test_criterion_8_oracle_equivalence(suite_scenarios, degenerate_scenarios):
    """Brute-force expected payoffs equal the analytic formulas on every suite scenario."""
    with criterion(8, "oracle equals analytic expected utilities on the whole suite"):
        bundled = [load_bundled(n)[0] for n in ("example2", "figure1", "figure5", "qaidm_failure")]
        for sc in suite_scenarios + degenerate_scenarios + bundled:
            reports = sc.truthful_reports()
            for mechanism, allocate in (("pev", pev_allocate), ("qaidm", qaidm_allocate)):
                utils, requester = expected_utilities(sc, reports, allocate(sc, reports))
                assert expected_payoff_profile(sc, reports, mechanism) == (utils, requester)
        for sc in degenerate_scenarios:
            reports = sc.truthful_reports()
            out, _ = idm_run(sc, reports, uniform_quality(sc))
            utils, requester = expected_utilities(sc, reports, out)
            assert expected_payoff_profile(sc, reports, "idm") == (utils, requester)


def test_criterion_9_monte_carlo_consistency():
    """100k seeded draws sit inside 4 standard errors; requester variance is 0."""
    with criterion(9, "100k-trial Monte Carlo matches analytic moments", bound=30.0):
        sc, reports = load_bundled("example2")
        stats = run_trials(sc, reports, "pev", 100_000, seed=0)
        result = compare(stats, *analytic_moments(sc, reports, "pev"))
        assert result.passed, result.render_text()
        assert stats.requester_variance == 0
