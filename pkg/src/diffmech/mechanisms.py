"""The verified contract mechanisms: network VCG, IDM, quality-aware IDM, PEV.

Each mechanism splits into an allocation phase (pure function of the report
profile) and a payoff phase (function of the outcome and the verified
realized quality). The shared skeleton:

  1. pick the champion: the participant whose report promises the highest
     expected welfare (expected quality minus cost), smallest id on ties;
  2. order her critical agents (s, i_1, ..., i_m = champion);
  3. for each member i, compute the removal welfare w_i: the best expected
     welfare attainable when i's report is nil'd out, floored at 0 by the
     null option (nobody works, welfare 0);
  4. select i_t, the first member whose own reported welfare exactly equals
     the removal welfare of the next member, else the champion;
  5. pay conduits their marginal contribution w_{i_{k+1}} - w_{i_k}; pay the
     selected agent realized quality minus w_{i_t} (PEV) or, in the flawed
     quality-aware IDM variant, reported expectation minus w_{i_t}.

Step 4's equality test is exact rational equality; this is why the whole
numeric tower is Fractions.

The null option generalizes the dummy agent of the uniform-quality setting:
whenever no participant reports positive expected welfare, nobody is
selected and every payoff is zero.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional

from .network import (
    CriticalSequence,
    ReportProfile,
    Scenario,
    ScenarioError,
    build_graph,
    candidates,
    critical_sequence,
    validate_reports,
    without_agent,
)
from .poq import expectation, expected_welfare, format_rational

ZERO = Fraction(0)


class MechanismError(ValueError):
    """A mechanism precondition does not hold (degeneracy, quality range, ...)."""


@dataclass(frozen=True)
class Allocation:
    """At most one worker is selected; None means the null option."""

    selected: Optional[int]

    def indicator(self, worker_ids: tuple[int, ...]) -> dict[int, int]:
        return {i: int(i == self.selected) for i in worker_ids}


@dataclass(frozen=True)
class EfficientChoice:
    allocation: Allocation
    welfare: Fraction  # reported expected welfare of the choice; 0 for null


def _reported_welfare(reports: ReportProfile, i: int) -> Fraction:
    rep = reports[i]
    assert rep is not None
    return expected_welfare(rep.pmf, rep.cost)


def efficient_allocation(scenario: Scenario, reports: ReportProfile) -> EfficientChoice:
    """Welfare-maximizing choice among reachable reporting agents.

    Falls back to the null option (welfare 0) when there is no participant
    or every candidate's reported welfare is negative. Ties break to the
    smallest agent id so the rule is a function.
    """
    graph = build_graph(scenario, reports)
    best: Optional[int] = None
    best_w = ZERO
    for i in sorted(candidates(graph, reports)):
        w = _reported_welfare(reports, i)
        if best is None or w > best_w:
            best, best_w = i, w
    if best is None or best_w < 0:
        return EfficientChoice(Allocation(None), ZERO)
    return EfficientChoice(Allocation(best), best_w)


@dataclass(frozen=True)
class MechanismOutcome:
    """Allocation-phase result shared by PEV, IDM and the quality-aware IDM.

    `welfare_without[i]` is the removal welfare w_i for every critical
    sequence member i; `selected_pos` is the 1-based position t of the
    selected agent within `sequence.members`. A null outcome has no
    champion, no sequence, and no selected agent.
    """

    mechanism: str
    scenario: Scenario = field(repr=False)
    reports: ReportProfile = field(repr=False)
    champion: Optional[int]
    sequence: Optional[CriticalSequence]
    welfare_without: Mapping[int, Fraction]
    selected_pos: Optional[int]

    @property
    def selected(self) -> Optional[int]:
        if self.sequence is None or self.selected_pos is None:
            return None
        return self.sequence.members[self.selected_pos - 1]

    @property
    def allocation(self) -> Allocation:
        return Allocation(self.selected)

    @property
    def is_null(self) -> bool:
        return self.selected is None


def _null_outcome(mechanism: str, scenario: Scenario, reports: ReportProfile) -> MechanismOutcome:
    return MechanismOutcome(
        mechanism=mechanism,
        scenario=scenario,
        reports=reports,
        champion=None,
        sequence=None,
        welfare_without={},
        selected_pos=None,
    )


def pev_allocate(
    scenario: Scenario,
    reports: ReportProfile,
    *,
    mechanism: str = "pev",
    tie_break: str = "min-id",
    rng: Optional[random.Random] = None,
) -> MechanismOutcome:
    """Allocation phase of the PEV diffusion mechanism.

    tie_break selects among equally good champions: "min-id" (default,
    deterministic) or "random" with a caller-supplied rng. Removal welfares
    and the selection rule are tie-independent either way.
    """
    validate_reports(scenario, reports)
    graph = build_graph(scenario, reports)
    cand = candidates(graph, reports)
    if not cand:
        return _null_outcome(mechanism, scenario, reports)
    welfare = {i: _reported_welfare(reports, i) for i in cand}
    top = max(welfare.values())
    if top < 0:
        return _null_outcome(mechanism, scenario, reports)
    pool = sorted(i for i in cand if welfare[i] == top)
    if tie_break == "min-id":
        champion = pool[0]
    elif tie_break == "random":
        if rng is None:
            raise MechanismError("random tie-break needs an rng")
        champion = rng.choice(pool)
    else:
        raise MechanismError(f"unknown tie_break {tie_break!r}")

    seq = critical_sequence(graph, champion)
    members = seq.members
    removal_welfare = {
        i: efficient_allocation(scenario, without_agent(reports, i)).welfare for i in members
    }
    pos = len(members)
    for k in range(1, len(members)):  # 1-based positions 1..m-1
        if welfare[members[k - 1]] == removal_welfare[members[k]]:
            pos = k
            break
    return MechanismOutcome(
        mechanism=mechanism,
        scenario=scenario,
        reports=reports,
        champion=champion,
        sequence=seq,
        welfare_without=removal_welfare,
        selected_pos=pos,
    )


@dataclass(frozen=True)
class PayoffVector:
    """Per-worker payments plus the requester's resulting utility."""

    payments: Mapping[int, Fraction]
    requester_utility: Fraction

    def total(self) -> Fraction:
        return sum(self.payments.values(), start=ZERO)


def _zero_payoffs(scenario: Scenario) -> PayoffVector:
    return PayoffVector({i: ZERO for i in scenario.worker_ids}, ZERO)


def pev_payoffs(outcome: MechanismOutcome, realized_quality: Fraction) -> PayoffVector:
    """Post-verification payoffs: conduits get w jumps, the worker gets q - w_t.

    Payments telescope, so the requester keeps exactly w_{i_1} whatever the
    realized quality turns out to be.
    """
    scenario = outcome.scenario
    if outcome.is_null:
        return _zero_payoffs(scenario)
    if realized_quality not in scenario.quality_levels:
        raise MechanismError(
            f"realized quality {format_rational(realized_quality)} not a scenario quality level"
        )
    assert outcome.sequence is not None and outcome.selected_pos is not None
    members = outcome.sequence.members
    t = outcome.selected_pos
    w = outcome.welfare_without
    pay = {i: ZERO for i in scenario.worker_ids}
    for k in range(1, t):
        pay[members[k - 1]] = w[members[k]] - w[members[k - 1]]
    pay[members[t - 1]] = realized_quality - w[members[t - 1]]
    return PayoffVector(pay, realized_quality - sum(pay.values(), start=ZERO))


def idm_run(
    scenario: Scenario, reports: ReportProfile, quality: Fraction
) -> tuple[MechanismOutcome, PayoffVector]:
    """Information Diffusion Mechanism in the uniform-quality setting.

    Requires every true and reported quality distribution to be the point
    mass at `quality`; under that restriction the PEV skeleton reduces to
    ranking by cost, and the realized quality is always `quality`.
    """
    _require_degenerate(scenario, reports, quality)
    outcome = pev_allocate(scenario, reports, mechanism="idm")
    return outcome, pev_payoffs(outcome, quality) if not outcome.is_null else _zero_payoffs(scenario)


def qaidm_allocate(scenario: Scenario, reports: ReportProfile) -> MechanismOutcome:
    """Allocation phase of the quality-aware IDM variant (same as PEV's)."""
    return pev_allocate(scenario, reports, mechanism="qaidm")


def qaidm_payoffs(outcome: MechanismOutcome, realized_quality: Fraction) -> PayoffVector:
    """Quality-aware IDM payoffs: the selected agent is paid on her REPORT.

    This is the variant that fails incentive compatibility: the worker's
    payment is her reported expectation minus w_t, independent of what she
    actually delivers, so inflating the report inflates the payment. Kept
    so the audit can exhibit the failure.
    """
    scenario = outcome.scenario
    if outcome.is_null:
        return _zero_payoffs(scenario)
    if realized_quality not in scenario.quality_levels:
        raise MechanismError(
            f"realized quality {format_rational(realized_quality)} not a scenario quality level"
        )
    assert outcome.sequence is not None and outcome.selected_pos is not None
    members = outcome.sequence.members
    t = outcome.selected_pos
    w = outcome.welfare_without
    sel = members[t - 1]
    rep = outcome.reports[sel]
    assert rep is not None
    pay = {i: ZERO for i in scenario.worker_ids}
    for k in range(1, t):
        pay[members[k - 1]] = w[members[k]] - w[members[k - 1]]
    pay[sel] = expectation(rep.pmf) - w[sel]
    return PayoffVector(pay, realized_quality - sum(pay.values(), start=ZERO))


def qaidm_run(
    scenario: Scenario, reports: ReportProfile
) -> tuple[MechanismOutcome, PayoffVector]:
    """Quality-aware IDM; requester utility reported in expectation.

    Payments do not depend on the realized quality, so only the requester's
    utility is random; it is taken in expectation over the selected agent's
    true distribution. Use `qaidm_payoffs` for a specific realization.
    """
    outcome = qaidm_allocate(scenario, reports)
    if outcome.is_null:
        return outcome, _zero_payoffs(scenario)
    sel = outcome.selected
    assert sel is not None
    some_quality = outcome.scenario.agents[sel].pmf.support[0]
    realized = qaidm_payoffs(outcome, some_quality)
    expected_q = expectation(outcome.scenario.agents[sel].pmf)
    return outcome, PayoffVector(realized.payments, expected_q - realized.total())


def vcg_run(
    scenario: Scenario, reports: ReportProfile, quality: Fraction
) -> tuple[Allocation, PayoffVector]:
    """Network VCG baseline in the uniform-quality setting.

    Allocates to the least-cost participant; every participant is paid her
    pivot value: the welfare of the chosen allocation with her own cost
    struck out, minus the best welfare attainable without her at all. On
    diffusion scenarios the conduit payments can exceed the welfare, running
    the requester into deficit; that is the point of keeping this baseline.
    """
    _require_degenerate(scenario, reports, quality)
    validate_reports(scenario, reports)
    graph = build_graph(scenario, reports)
    cand = candidates(graph, reports)
    pay = {i: ZERO for i in scenario.worker_ids}
    if not cand:
        return Allocation(None), PayoffVector(pay, ZERO)
    cost = {i: reports[i].cost for i in cand}  # type: ignore[union-attr]
    winner = min(sorted(cand), key=lambda i: (cost[i], i))
    if quality - cost[winner] < 0:
        return Allocation(None), PayoffVector(pay, ZERO)
    for i in sorted(cand):
        chosen_minus_own = quality - (cost[winner] if i != winner else ZERO)
        rest = without_agent(reports, i)
        rest_cand = candidates(build_graph(scenario, rest), rest)
        if rest_cand:
            best_rest = quality - min(reports[k].cost for k in rest_cand)  # type: ignore[union-attr]
            w_i = max(ZERO, best_rest)
        else:
            w_i = ZERO
        pay[i] = chosen_minus_own - w_i
    return Allocation(winner), PayoffVector(pay, quality - sum(pay.values(), start=ZERO))


def expected_utilities(
    scenario: Scenario, reports: ReportProfile, outcome: MechanismOutcome
) -> tuple[dict[int, Fraction], Fraction]:
    """Closed-form expected utilities against TRUE types.

    Conduits earn their (deterministic) w jump; the selected agent earns her
    true expected quality (or, under qaidm, her reported one) minus w_t and
    her true cost; everyone else earns 0; the requester earns w_{i_1} under
    PEV/IDM by the telescoping identity. The brute-force counterpart lives
    in `audit.expected_utility_oracle`.
    """
    util = {i: ZERO for i in scenario.worker_ids}
    if outcome.is_null:
        return util, ZERO
    assert outcome.sequence is not None and outcome.selected_pos is not None
    members = outcome.sequence.members
    t = outcome.selected_pos
    w = outcome.welfare_without
    sel = members[t - 1]
    for k in range(1, t):
        util[members[k - 1]] = w[members[k]] - w[members[k - 1]]
    true_type = scenario.agents[sel]
    if outcome.mechanism == "qaidm":
        rep = outcome.reports[sel]
        assert rep is not None
        util[sel] = expectation(rep.pmf) - w[sel] - true_type.cost
        requester = expectation(true_type.pmf) - (
            sum(w[members[k]] - w[members[k - 1]] for k in range(1, t))
            + (expectation(rep.pmf) - w[sel])
        )
    else:
        util[sel] = expectation(true_type.pmf) - w[sel] - true_type.cost
        requester = w[members[0]]
    return util, requester


MECHANISM_NAMES = ("pev", "idm", "qaidm", "vcg")


def uniform_quality(scenario: Scenario) -> Fraction:
    """The common point-mass quality of a degenerate scenario.

    idm/vcg presuppose the uniform-quality setting; when no explicit q is
    given this infers it from the true types, or explains why it cannot.
    """
    qs = {t.pmf.points[0][0] for t in scenario.agents.values()}
    if any(len(t.pmf.points) > 1 for t in scenario.agents.values()) or len(qs) != 1:
        raise MechanismError(
            "scenario is not degenerate: agents' true pmfs are not a single "
            "common point mass, so there is no uniform quality to infer"
        )
    return next(iter(qs))


def payoff_schedule(
    scenario: Scenario, reports: ReportProfile, mechanism: str
) -> tuple[Optional[int], Callable[[Fraction], PayoffVector]]:
    """Run a mechanism's allocation phase; return (selected, payoffs at q).

    The returned function maps a realized quality to the full payoff vector;
    for idm/vcg (fixed uniform quality) it still validates its argument.
    """
    if mechanism == "pev":
        outcome = pev_allocate(scenario, reports)
        return outcome.selected, lambda q: pev_payoffs(outcome, q)
    if mechanism == "qaidm":
        outcome = qaidm_allocate(scenario, reports)
        return outcome.selected, lambda q: qaidm_payoffs(outcome, q)
    if mechanism == "idm":
        q0 = uniform_quality(scenario)
        outcome, payoffs = idm_run(scenario, reports, q0)

        def idm_at(q: Fraction) -> PayoffVector:
            if q != q0:
                raise MechanismError(
                    f"degenerate scenario realizes quality {format_rational(q0)}, "
                    f"not {format_rational(q)}"
                )
            return payoffs

        return outcome.selected, idm_at
    if mechanism == "vcg":
        q0 = uniform_quality(scenario)
        allocation, payoffs = vcg_run(scenario, reports, q0)

        def vcg_at(q: Fraction) -> PayoffVector:
            if q != q0:
                raise MechanismError(
                    f"degenerate scenario realizes quality {format_rational(q0)}, "
                    f"not {format_rational(q)}"
                )
            return payoffs

        return allocation.selected, vcg_at
    raise MechanismError(f"unknown mechanism {mechanism!r}; expected one of {MECHANISM_NAMES}")


def _require_degenerate(scenario: Scenario, reports: ReportProfile, quality: Fraction) -> None:
    if quality not in scenario.quality_levels:
        raise MechanismError(
            f"uniform quality {format_rational(quality)} not a scenario quality level"
        )
    for i, t in scenario.agents.items():
        if not t.pmf.is_point_mass_at(quality):
            raise MechanismError(
                f"agent {i}: true quality distribution is not the point mass at "
                f"{format_rational(quality)}"
            )
    for i, rep in reports.items():
        if rep is not None and not rep.pmf.is_point_mass_at(quality):
            raise MechanismError(
                f"agent {i}: reported quality distribution is not the point mass at "
                f"{format_rational(quality)}"
            )
