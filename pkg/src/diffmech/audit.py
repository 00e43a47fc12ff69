"""Property audits: IR, IC, WBB, the two payoff lemmas, and the efficiency gap.

Everything here is checked, not assumed. Expected utilities come from a
brute-force oracle (run the mechanism, enumerate the selected agent's true
support, weight the realized payoffs) that shares no code with the analytic
`mechanisms.expected_utilities`. Incentive compatibility is audited by
enumerating a documented finite deviation grid per agent; a clean result is
therefore reported as "holds-on-grid", never as a proof. A violation always
carries a replayable witness: the exact profile that strictly improved on
truth, with both utilities.

The IC scan is the hot loop; on scenarios the integer kernel supports it
runs there, and any violation the kernel reports is re-derived through the
reference oracle before it is believed.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional, Sequence

from . import _kernel
from .mechanisms import (
    MechanismError,
    efficient_allocation,
    payoff_schedule,
    pev_allocate,
    pev_payoffs,
)
from .network import (
    Report,
    ReportProfile,
    Scenario,
    build_graph,
    candidates,
    without_agent,
)
from .poq import Pmf, expectation, expected_welfare, format_rational

ZERO = Fraction(0)


# --- brute-force expected utilities --------------------------------------


def expected_payoff_profile(
    scenario: Scenario, reports: ReportProfile, mechanism: str
) -> tuple[dict[int, Fraction], Fraction]:
    """Oracle expectations for every agent plus the requester.

    Runs the allocation once, then walks every support point of the
    selected agent's TRUE pmf and averages the realized payoff vectors.
    No telescoping shortcut, no analytic identity: this is the slow,
    obviously-right path the fast paths are compared against.
    """
    utils = {i: ZERO for i in scenario.worker_ids}
    selected, payoffs_at = payoff_schedule(scenario, reports, mechanism)
    if selected is None:
        return utils, ZERO
    requester = ZERO
    for q, prob in scenario.agents[selected].pmf.points:
        vector = payoffs_at(q)
        for i in scenario.worker_ids:
            u = vector.payments[i]
            if i == selected:
                u -= scenario.agents[i].cost
            utils[i] += prob * u
        requester += prob * vector.requester_utility
    return utils, requester


def expected_utility_oracle(
    scenario: Scenario, reports: ReportProfile, mechanism: str, agent: int
) -> Fraction:
    """One agent's oracle expected utility (true type, reported profile)."""
    return expected_payoff_profile(scenario, reports, mechanism)[0][agent]


# --- reports --------------------------------------------------------------


@dataclass(frozen=True)
class Witness:
    """A replayable counterexample: who deviated, to what, and the gain."""

    agent: int
    deviation: Optional[Report]  # None is the nil deviation
    context: Optional[dict[int, Optional[Report]]]  # non-truthful others, if any
    truthful_utility: Fraction
    deviant_utility: Fraction

    @property
    def gain(self) -> Fraction:
        return self.deviant_utility - self.truthful_utility

    def describe(self) -> str:
        if self.deviation is None:
            what = "report nil"
        else:
            d = self.deviation
            invited = sorted(d.invited, key=str)
            what = (
                f"report pmf {d.pmf}, cost {format_rational(d.cost)}, "
                f"invite {{{', '.join(str(v) for v in invited)}}}"
            )
        ctx = "" if not self.context else " (against a non-truthful context)"
        return (
            f"agent {self.agent}: {what}{ctx}; utility "
            f"{format_rational(self.truthful_utility)} -> "
            f"{format_rational(self.deviant_utility)} "
            f"(gain {format_rational(self.gain)})"
        )


@dataclass(frozen=True)
class AuditReport:
    """Verdict for one property on one scenario."""

    prop: str  # IR | IC | WBB | Lemma1 | Lemma2 | Efficiency
    mechanism: str
    verdict: str  # "holds" | "holds-on-grid" | "violated"
    details: tuple[str, ...] = ()
    witness: Optional[Witness] = None
    checked: int = 0  # cases examined (deviations, support points, ...)

    @property
    def ok(self) -> bool:
        return self.verdict != "violated"

    def render_text(self) -> str:
        head = f"[{self.prop}] {self.mechanism}: {self.verdict}"
        if self.checked:
            head += f" ({self.checked} cases)"
        lines = [head]
        lines.extend(f"  {d}" for d in self.details)
        if self.witness is not None:
            lines.append(f"  witness: {self.witness.describe()}")
        return "\n".join(lines)

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "property": self.prop,
            "mechanism": self.mechanism,
            "verdict": self.verdict,
            "checked": self.checked,
            "details": list(self.details),
        }
        if self.witness is not None:
            w = self.witness
            doc["witness"] = {
                "agent": w.agent,
                "deviation": None
                if w.deviation is None
                else {
                    "pmf": [[format_rational(q), format_rational(p)] for q, p in w.deviation.pmf.points],
                    "cost": format_rational(w.deviation.cost),
                    "invited": sorted((str(v) for v in w.deviation.invited), key=str),
                },
                "truthful_utility": format_rational(w.truthful_utility),
                "deviant_utility": format_rational(w.deviant_utility),
            }
        return doc


# --- deviation grid --------------------------------------------------------


@dataclass(frozen=True)
class DeviationGrid:
    """Recipe for the finite deviation space audited per agent.

    Cost deviations: the true cost, its multiplicative scalings, a +/- step
    neighborhood, and the extremes 0 and the top quality level. Pmf
    deviations: single mass shifts of `step` between support points,
    support extensions to unused levels, and point-mass collapses to every
    level, plus truth. Edge deviations: every invited subset when the
    neighbor set is small, else a seeded sample; nil is always included.
    Degenerate mechanisms (idm, vcg) keep the pmf pinned to truth.
    """

    step: Fraction = Fraction(1, 10)
    cost_scalings: tuple[Fraction, ...] = (Fraction(0), Fraction(1, 2), Fraction(2))
    max_enumerated_neighbors: int = 12
    edge_samples: int = 2048
    include_nil: bool = True
    pin_pmf: bool = False  # idm/vcg: misreports may not break degeneracy

    def cost_options(self, scenario: Scenario, agent: int) -> tuple[Fraction, ...]:
        c = scenario.agents[agent].cost
        top = max(scenario.quality_levels)
        opts = {c, ZERO, top}
        opts.update(c * s for s in self.cost_scalings)
        opts.update(v for v in (c - self.step, c + self.step) if v >= 0)
        return tuple(sorted(opts))

    def pmf_options(self, scenario: Scenario, agent: int) -> tuple[Pmf, ...]:
        truth = scenario.agents[agent].pmf
        if self.pin_pmf:
            return (truth,)
        levels = sorted(scenario.quality_levels)
        seen = {truth.points: truth}

        def add(pairs: Sequence[tuple[Fraction, Fraction]]) -> None:
            pmf = Pmf.from_pairs(pairs)
            seen.setdefault(pmf.points, pmf)

        support = truth.support
        for a, b in itertools.permutations(support, 2):  # shift step mass a -> b
            pa = truth.probability(a)
            if pa >= self.step:
                add([(q, p - self.step if q == a else p + self.step if q == b else p)
                     for q, p in truth.points])
        for level in levels:  # extend support by moving step mass onto a new level
            if level in support:
                continue
            for a in support:
                pa = truth.probability(a)
                if pa >= self.step:
                    add([*((q, p - self.step if q == a else p) for q, p in truth.points),
                         (level, self.step)])
        for level in levels:  # collapses, including the max-level inflation
            add([(level, Fraction(1))])
        return tuple(seen.values())

    def invited_options(
        self, scenario: Scenario, agent: int, rng: random.Random
    ) -> tuple[frozenset, ...]:
        truth = scenario.agents[agent].neighbors
        workers = sorted(v for v in truth if isinstance(v, int))
        fixed = truth - set(workers)  # the s edge is not an invitation
        if len(workers) <= self.max_enumerated_neighbors:
            combos = [
                frozenset(sub) | fixed
                for r in range(len(workers) + 1)
                for sub in itertools.combinations(workers, r)
            ]
        else:
            combos = [truth]
            picked = {frozenset(workers)}
            while len(combos) < self.edge_samples:
                sub = frozenset(v for v in workers if rng.random() < 0.5)
                if sub not in picked:
                    picked.add(sub)
                    combos.append(sub | fixed)
        return tuple(combos)

    def reports_for(
        self, scenario: Scenario, agent: int, rng: random.Random
    ) -> list[Optional[Report]]:
        """All grid deviations for one agent, truth first, nil last."""
        truth_type = scenario.agents[agent]
        truthful = Report(truth_type.pmf, truth_type.cost, truth_type.neighbors)
        out: list[Optional[Report]] = [truthful]
        for pmf in self.pmf_options(scenario, agent):
            for cost in self.cost_options(scenario, agent):
                for invited in self.invited_options(scenario, agent, rng):
                    rep = Report(pmf, cost, invited)
                    if rep != truthful:
                        out.append(rep)
        if self.include_nil:
            out.append(None)
        return out

    def rationals(self, scenario: Scenario) -> list[Fraction]:
        """Every rational any generated report can contain (for kernel scaling)."""
        vals: list[Fraction] = []
        for agent in scenario.worker_ids:
            vals.extend(self.cost_options(scenario, agent))
            for pmf in self.pmf_options(scenario, agent):
                vals.append(expectation(pmf))
        return vals


def grid_for(mechanism: str, step: Fraction = Fraction(1, 10)) -> DeviationGrid:
    return DeviationGrid(step=step, pin_pmf=mechanism in ("idm", "vcg"))


# --- IR ---------------------------------------------------------------------


def check_ir(scenario: Scenario, mechanism: str) -> AuditReport:
    """Truthful participation never loses, agent by agent, via the oracle."""
    truth = scenario.truthful_reports()
    utils, requester = expected_payoff_profile(scenario, truth, mechanism)
    bad = [i for i, u in sorted(utils.items()) if u < 0]
    details = tuple(
        f"u_{i} = {format_rational(u)}" for i, u in sorted(utils.items()) if u != 0
    ) or ("all utilities 0",)
    if bad:
        return AuditReport(
            "IR", mechanism, "violated",
            details=details
            + tuple(f"agent {i} loses: u_{i} = {format_rational(utils[i])}" for i in bad),
            checked=len(utils) + 1,
        )
    details = details + (f"requester = {format_rational(requester)}",)
    return AuditReport("IR", mechanism, "holds", details=details, checked=len(utils) + 1)


# --- IC ---------------------------------------------------------------------


def _kernel_context(
    scenario: Scenario, grid: DeviationGrid
) -> Optional[_kernel.KernelInstance]:
    try:
        return _kernel.compile_instance(scenario, extra=grid.rationals(scenario))
    except _kernel.KernelUnavailable:
        return None


def _random_context(
    scenario: Scenario, grid: DeviationGrid, rng: random.Random
) -> dict[int, Optional[Report]]:
    """A non-truthful profile for the other agents, drawn from their own grids."""
    ctx: dict[int, Optional[Report]] = {}
    for i in scenario.worker_ids:
        options = grid.reports_for(scenario, i, rng)
        ctx[i] = rng.choice(options)
    return ctx


def check_ic(
    scenario: Scenario,
    mechanism: str,
    grid: Optional[DeviationGrid] = None,
    *,
    seed: int = 0,
    extra_contexts: int = 1,
) -> AuditReport:
    """Search the deviation grid for a strict improvement over truth.

    Deviations are unilateral: one agent deviates while the rest hold a
    fixed context. The truthful context is always audited; extra_contexts
    adds seeded non-truthful contexts (truth must be a dominant strategy,
    so it must also win there). The first strict improvement found is
    returned as a replayable witness.
    """
    if grid is None:
        grid = grid_for(mechanism)
    rng = random.Random(f"diffmech-ic:{seed}")
    contexts: list[Optional[dict[int, Optional[Report]]]] = [None]
    contexts.extend(_random_context(scenario, grid, rng) for _ in range(extra_contexts))

    truth = scenario.truthful_reports()
    kern = _kernel_context(scenario, grid) if mechanism in ("pev", "qaidm") else None
    mech_code = _kernel.MECH_QAIDM if mechanism == "qaidm" else _kernel.MECH_PEV

    checked = 0
    for ctx in contexts:
        base: dict[int, Optional[Report]] = dict(truth) if ctx is None else dict(ctx)
        for agent in scenario.worker_ids:
            base_for_agent = dict(base)
            base_for_agent[agent] = truth[agent]  # the agent's honest baseline
            devs = grid.reports_for(scenario, agent, rng)
            assert devs[0] == truth[agent]
            checked += len(devs)

            witness: Optional[Witness] = None
            if kern is not None:
                prof = _kernel.compile_profile(kern, base_for_agent)
                encoded = [_kernel.encode_report(kern, agent, d) for d in devs]
                best_j, best_u = _kernel.scan_deviations(
                    kern, prof, agent, mech_code, encoded
                )
                truth_u = _kernel.agent_utility(kern, prof, agent, mech_code)
                if best_u > truth_u:
                    witness = _confirmed_witness(
                        scenario, mechanism, base_for_agent, agent,
                        devs[best_j], ctx, truth_u,
                    )
            else:
                truth_u = expected_utility_oracle(
                    scenario, base_for_agent, mechanism, agent
                )
                for dev in devs[1:]:
                    trial = dict(base_for_agent)
                    trial[agent] = dev
                    try:
                        u = expected_utility_oracle(scenario, trial, mechanism, agent)
                    except MechanismError:
                        continue  # deviation outside this mechanism's setting
                    if u > truth_u:
                        witness = Witness(agent, dev, ctx, truth_u, u)
                        break
            if witness is not None:
                return AuditReport(
                    "IC", mechanism, "violated",
                    details=(f"profitable deviation found after {checked} evaluations",),
                    witness=witness,
                    checked=checked,
                )
    return AuditReport(
        "IC", mechanism, "holds-on-grid",
        details=(
            f"{len(contexts)} context(s), {len(scenario.worker_ids)} agents, "
            f"grid step {format_rational(grid.step)}",
        ),
        checked=checked,
    )


def _confirmed_witness(
    scenario: Scenario,
    mechanism: str,
    base: dict[int, Optional[Report]],
    agent: int,
    deviation: Optional[Report],
    ctx: Optional[dict[int, Optional[Report]]],
    kernel_truth_u: Fraction,
) -> Witness:
    """Replay a kernel-reported violation through the reference oracle."""
    truth_u = expected_utility_oracle(scenario, base, mechanism, agent)
    if truth_u != kernel_truth_u:
        raise AssertionError(
            f"kernel and oracle disagree on the truthful utility of agent {agent}: "
            f"{kernel_truth_u} vs {truth_u}"
        )
    trial = dict(base)
    trial[agent] = deviation
    dev_u = expected_utility_oracle(scenario, trial, mechanism, agent)
    if dev_u <= truth_u:
        raise AssertionError(
            f"kernel-reported violation for agent {agent} did not replay: "
            f"{dev_u} <= {truth_u}"
        )
    return Witness(agent, deviation, ctx, truth_u, dev_u)


def replay_witness(
    scenario: Scenario, mechanism: str, witness: Witness
) -> tuple[Fraction, Fraction]:
    """Recompute (truthful, deviant) utilities for a witness from scratch."""
    truth = scenario.truthful_reports()
    base: dict[int, Optional[Report]] = (
        dict(truth) if witness.context is None else dict(witness.context)
    )
    base[witness.agent] = truth[witness.agent]
    truthful = expected_utility_oracle(scenario, base, mechanism, witness.agent)
    base[witness.agent] = witness.deviation
    deviant = expected_utility_oracle(scenario, base, mechanism, witness.agent)
    return truthful, deviant


# --- WBB ---------------------------------------------------------------------


def check_wbb(
    scenario: Scenario, mechanism: str, reports: Optional[ReportProfile] = None
) -> AuditReport:
    """Requester never pays out more than the realized quality brought in.

    For pev/idm this is the telescoping identity: realized requester
    utility equals the first removal welfare at EVERY support point, and
    that value is nonnegative. For qaidm/vcg the requester utility is
    simply computed and judged by sign (vcg is expected to fail on
    diffusion scenarios; that deficit is the point of the comparison).
    """
    if reports is None:
        reports = scenario.truthful_reports()
    selected, payoffs_at = payoff_schedule(scenario, reports, mechanism)
    if selected is None:
        return AuditReport(
            "WBB", mechanism, "holds", details=("null outcome, utility 0",), checked=1
        )
    support = scenario.agents[selected].pmf.points

    if mechanism in ("pev", "idm"):
        outcome = pev_allocate(scenario, reports)
        first = outcome.sequence.members[0]  # type: ignore[union-attr]
        w1 = outcome.welfare_without[first]
        for q, _ in support:
            got = payoffs_at(q).requester_utility
            if got != w1:
                return AuditReport(
                    "WBB", mechanism, "violated",
                    details=(
                        f"requester utility {format_rational(got)} at q = "
                        f"{format_rational(q)} differs from w_first = {format_rational(w1)}",
                    ),
                    checked=len(support),
                )
        verdict = "holds" if w1 >= 0 else "violated"
        return AuditReport(
            "WBB", mechanism, verdict,
            details=(
                f"requester utility = {format_rational(w1)} at every realized quality",
            ),
            checked=len(support),
        )

    expected = ZERO
    for q, prob in support:
        expected += prob * payoffs_at(q).requester_utility
    verdict = "holds" if expected >= 0 else "violated"
    return AuditReport(
        "WBB", mechanism, verdict,
        details=(f"expected requester utility = {format_rational(expected)}",),
        checked=len(support),
    )


# --- efficiency gap ------------------------------------------------------------


def check_efficiency_gap(scenario: Scenario, mechanism: str) -> AuditReport:
    """Efficient true welfare minus the true welfare of the mechanism's pick."""
    truth = scenario.truthful_reports()
    best = ZERO
    best_agent: Optional[int] = None
    graph = build_graph(scenario, truth)
    for i in sorted(candidates(graph, truth)):
        w = expected_welfare(scenario.agents[i].pmf, scenario.agents[i].cost)
        if best_agent is None or w > best:
            best_agent, best = i, w
    if best_agent is None or best < 0:
        best_agent, best = None, ZERO

    selected, _ = payoff_schedule(scenario, truth, mechanism)
    achieved = (
        ZERO
        if selected is None
        else expected_welfare(scenario.agents[selected].pmf, scenario.agents[selected].cost)
    )
    gap = best - achieved
    verdict = "holds" if gap == 0 else "violated"
    return AuditReport(
        "Efficiency", mechanism, verdict,
        details=(
            f"efficient: agent {best_agent} at {format_rational(best)}; "
            f"selected: agent {selected} at {format_rational(achieved)}; "
            f"gap = {format_rational(gap)}",
        ),
        checked=1,
    )


# --- lemmas ---------------------------------------------------------------------


def _perturbed_reports(truth_report: Report, scenario: Scenario, step: Fraction) -> list[Report]:
    """Own-report perturbations used by the Lemma 2 check."""
    out = []
    for dc in (step, -step, 3 * step):
        if truth_report.cost + dc >= 0:
            out.append(Report(truth_report.pmf, truth_report.cost + dc, truth_report.invited))
    for level in (min(scenario.quality_levels), max(scenario.quality_levels)):
        out.append(Report(Pmf.point_mass(level), truth_report.cost, truth_report.invited))
    return out


def check_lemmas(scenario: Scenario, step: Fraction = Fraction(1, 10)) -> AuditReport:
    """Monotone removal welfares; payoffs independent of the agent's own report.

    Lemma1: along the critical sequence of the truthful outcome the w
    values never decrease. Lemma2, testably: (a) recomputing any member's
    removal welfare with her report replaced by junk changes nothing (w is
    a function of the others' reports only); (b) perturbing a member's own
    report, whenever it leaves the selected agent and sequence unchanged,
    leaves her payment unchanged at every realized quality.
    """
    truth = scenario.truthful_reports()
    outcome = pev_allocate(scenario, truth)
    if outcome.is_null:
        return AuditReport(
            "Lemma1+2", "pev", "holds", details=("null outcome",), checked=0
        )
    members = outcome.sequence.members  # type: ignore[union-attr]
    w = outcome.welfare_without
    checked = 0

    chain = [w[i] for i in members]
    for a, b in zip(chain, chain[1:]):
        checked += 1
        if a > b:
            return AuditReport(
                "Lemma1+2", "pev", "violated",
                details=(
                    "w chain decreases: "
                    + ", ".join(format_rational(x) for x in chain),
                ),
                checked=checked,
            )
    details = ["w chain: " + ", ".join(format_rational(x) for x in chain)]

    selected = outcome.selected
    assert selected is not None
    support = [q for q, _ in scenario.agents[selected].pmf.points]
    base_payments = {q: pev_payoffs(outcome, q).payments for q in support}

    for i in members:
        # (a) w_i never reads i's own report
        for junk in _perturbed_reports(truth[i], scenario, step):
            perturbed = dict(truth)
            perturbed[i] = junk
            recomputed = efficient_allocation(
                scenario, without_agent(perturbed, i)
            ).welfare
            checked += 1
            if recomputed != w[i]:
                return AuditReport(
                    "Lemma1+2", "pev", "violated",
                    details=(f"w_{i} changed under an own-report perturbation",),
                    checked=checked,
                )
        # (b) same selection and sequence => bit-identical payment
        for junk in _perturbed_reports(truth[i], scenario, step):
            perturbed = dict(truth)
            perturbed[i] = junk
            alt = pev_allocate(scenario, perturbed)
            if alt.is_null or alt.selected != selected:
                continue
            if alt.sequence.members != members:  # type: ignore[union-attr]
                continue
            checked += 1
            for q in support:
                if pev_payoffs(alt, q).payments[i] != base_payments[q][i]:
                    return AuditReport(
                        "Lemma1+2", "pev", "violated",
                        details=(
                            f"p_{i} changed at q = {format_rational(q)} under an "
                            "own-report perturbation preserving the outcome",
                        ),
                        checked=checked,
                    )
    details.append("payoffs invariant under own-report perturbations")
    return AuditReport(
        "Lemma1+2", "pev", "holds", details=tuple(details), checked=checked
    )


# --- convenience ----------------------------------------------------------------


def run_audits(
    scenario: Scenario,
    mechanism: str,
    properties: Sequence[str],
    *,
    grid: Optional[DeviationGrid] = None,
    seed: int = 0,
) -> list[AuditReport]:
    """Run the named property checks in a fixed order."""
    order = ["ir", "ic", "wbb", "lemmas", "gap"]
    wanted = [p for p in order if p in set(properties)]
    unknown = set(properties) - set(order)
    if unknown:
        raise ValueError(f"unknown audit properties: {sorted(unknown)}")
    out = []
    for p in wanted:
        if p == "ir":
            out.append(check_ir(scenario, mechanism))
        elif p == "ic":
            out.append(check_ic(scenario, mechanism, grid, seed=seed))
        elif p == "wbb":
            out.append(check_wbb(scenario, mechanism))
        elif p == "lemmas":
            out.append(check_lemmas(scenario))
        elif p == "gap":
            out.append(check_efficiency_gap(scenario, mechanism))
    return out
