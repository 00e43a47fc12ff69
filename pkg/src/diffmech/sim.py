"""Seeded Monte Carlo runs and their comparison against analytic expectations.

A mechanism run is deterministic except for the realized quality, so a
simulation computes the allocation once, caches the payoff vector at every
support point of the selected agent's true pmf, and then only draws
qualities. Each trial gets its own generator derived from (master seed,
trial index), making results independent of execution order.

All statistics are exact rationals: the per-trial utility takes one of a
handful of values, so means and variances are computed from draw counts,
not floating accumulation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

from .mechanisms import payoff_schedule
from .network import ReportProfile, Scenario
from .poq import format_rational, sample

ZERO = Fraction(0)


@dataclass(frozen=True)
class TrialStats:
    """Empirical moments of a seeded batch of mechanism trials."""

    mechanism: str
    trials: int
    seed: int
    selected: Optional[int]
    agent_mean: Mapping[int, Fraction]
    agent_variance: Mapping[int, Fraction]
    requester_mean: Fraction
    requester_variance: Fraction


def _trial_rng(seed: int, index: int) -> random.Random:
    # unique, order-independent stream per (seed, index)
    return random.Random((seed << 64) + index)


def run_trials(
    scenario: Scenario, reports: ReportProfile, mechanism: str, n: int, seed: int
) -> TrialStats:
    """n independent realized-quality draws; exact empirical moments."""
    if n < 1:
        raise ValueError("need at least one trial")
    selected, payoffs_at = payoff_schedule(scenario, reports, mechanism)
    ids = scenario.worker_ids
    if selected is None:
        zeros = {i: ZERO for i in ids}
        return TrialStats(mechanism, n, seed, None, zeros, dict(zeros), ZERO, ZERO)

    pmf = scenario.agents[selected].pmf
    cost = scenario.agents[selected].cost
    utility_at: dict[Fraction, dict[int, Fraction]] = {}
    requester_at: dict[Fraction, Fraction] = {}
    for q in pmf.support:
        vector = payoffs_at(q)
        utility_at[q] = {
            i: vector.payments[i] - (cost if i == selected else ZERO) for i in ids
        }
        requester_at[q] = vector.requester_utility

    counts = {q: 0 for q in pmf.support}
    for k in range(n):
        counts[sample(pmf, _trial_rng(seed, k))] += 1

    def moments(value_at: Mapping[Fraction, Fraction]) -> tuple[Fraction, Fraction]:
        mean = sum((counts[q] * value_at[q] for q in counts), start=ZERO) / n
        var = sum(
            (counts[q] * (value_at[q] - mean) ** 2 for q in counts), start=ZERO
        ) / n
        return mean, var

    agent_mean: dict[int, Fraction] = {}
    agent_variance: dict[int, Fraction] = {}
    for i in ids:
        mean, var = moments({q: utility_at[q][i] for q in counts})
        agent_mean[i] = mean
        agent_variance[i] = var
    requester_mean, requester_variance = moments(requester_at)
    return TrialStats(
        mechanism, n, seed, selected,
        agent_mean, agent_variance, requester_mean, requester_variance,
    )


def analytic_moments(
    scenario: Scenario, reports: ReportProfile, mechanism: str
) -> tuple[dict[int, Fraction], dict[int, Fraction], Fraction, Fraction]:
    """True means and variances of every utility under the mechanism.

    Walks the selected agent's true support with the realized payoff
    vectors: E[u] and E[u^2] - E[u]^2, exactly.
    """
    ids = scenario.worker_ids
    means = {i: ZERO for i in ids}
    second = {i: ZERO for i in ids}
    req_mean = ZERO
    req_second = ZERO
    selected, payoffs_at = payoff_schedule(scenario, reports, mechanism)
    if selected is None:
        return means, dict(means), ZERO, ZERO
    cost = scenario.agents[selected].cost
    for q, prob in scenario.agents[selected].pmf.points:
        vector = payoffs_at(q)
        for i in ids:
            u = vector.payments[i] - (cost if i == selected else ZERO)
            means[i] += prob * u
            second[i] += prob * u * u
        req_mean += prob * vector.requester_utility
        req_second += prob * vector.requester_utility ** 2
    variances = {i: second[i] - means[i] ** 2 for i in ids}
    return means, variances, req_mean, req_second - req_mean**2


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    empirical: Fraction
    analytic: Fraction
    z: Optional[float]  # None when the exact (zero-variance) rule applied
    ok: bool


@dataclass(frozen=True)
class Comparison:
    passed: bool
    rows: tuple[ComparisonRow, ...]

    def render_text(self) -> str:
        lines = []
        for r in self.rows:
            z = "exact" if r.z is None else f"z = {r.z:.2f}"
            mark = "ok" if r.ok else "FAIL"
            lines.append(
                f"  {r.label}: empirical {format_rational(r.empirical)} vs "
                f"analytic {format_rational(r.analytic)} ({z}) {mark}"
            )
        lines.append("comparison: " + ("pass" if self.passed else "FAIL"))
        return "\n".join(lines)


def compare(
    stats: TrialStats,
    analytic_mean: Mapping[int, Fraction],
    analytic_variance: Mapping[int, Fraction],
    requester_mean: Fraction,
    requester_variance: Fraction,
) -> Comparison:
    """4-standard-error acceptance per agent; exact equality when variance is 0.

    The band test is done in squared form, n * (emp - mean)^2 <= 16 * var,
    entirely in rationals; the reported z is a float for display only.
    """
    rows = []

    def judge(label: str, emp: Fraction, mean: Fraction, var: Fraction) -> None:
        if var == 0:
            rows.append(ComparisonRow(label, emp, mean, None, emp == mean))
            return
        lhs = stats.trials * (emp - mean) ** 2
        ok = lhs <= 16 * var
        z = float((lhs / var) ** Fraction(1, 2)) if var else 0.0
        rows.append(ComparisonRow(label, emp, mean, z, ok))

    for i in sorted(analytic_mean):
        judge(f"agent {i}", stats.agent_mean[i], analytic_mean[i], analytic_variance[i])
    judge("requester", stats.requester_mean, requester_mean, requester_variance)
    return Comparison(all(r.ok for r in rows), tuple(rows))
