"""Exhaustive incentive audit at micro scale: tiny worlds, entire type space.

The continuum incentive claim cannot be enumerated, so this suite nails
down a small closed world and leaves NOTHING in it unexplored on the
deviation side:

  - two quality levels, 1/4 and 1;
  - reported pmfs: all five 1/4-grid splits between the two levels;
  - costs: all seven 1/4-grid values from 0 through 3/2;
  - deviations per agent: every (pmf, cost) pair above, crossed with every
    subset of her true neighbors, plus nil - the full discretized type
    space, diffusion deviations included.

Scenario coverage: with one or two agents every topology in the catalog is
crossed with every true-type assignment (the full closed world). With
three or four agents the assignment space is too large to cross in the
time budget, so seeded draws from it are used instead; the deviation space
stays exhaustive for every audited agent. A profitable deviation anywhere
is returned as a replayable witness and fails the build.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

from . import _kernel
from .audit import Witness, expected_utility_oracle
from .network import AgentType, Report, Scenario
from .poq import Pmf, expectation

LOW = Fraction(1, 4)
HIGH = Fraction(1)
LEVELS = frozenset({LOW, HIGH})

GRID_PMFS: tuple[Pmf, ...] = tuple(
    Pmf.from_pairs([(LOW, Fraction(k, 4)), (HIGH, Fraction(4 - k, 4))]) for k in range(5)
)
GRID_COSTS: tuple[Fraction, ...] = tuple(Fraction(k, 4) for k in range(7))
GRID_TYPES: tuple[tuple[Pmf, Fraction], ...] = tuple(
    itertools.product(GRID_PMFS, GRID_COSTS)
)

# (requester_neighbors, worker -> neighbor set); every graph is connected
# from s under full invitations
_TOPOLOGIES: dict[int, tuple[tuple[frozenset, dict[int, frozenset]], ...]] = {
    1: (
        (frozenset({1}), {1: frozenset()}),
    ),
    2: (
        (frozenset({1, 2}), {1: frozenset(), 2: frozenset()}),
        (frozenset({1, 2}), {1: frozenset({2}), 2: frozenset({1})}),
        (frozenset({1, 2}), {1: frozenset({2}), 2: frozenset()}),
        (frozenset({1, 2}), {1: frozenset(), 2: frozenset({1})}),
        (frozenset({1}), {1: frozenset({2}), 2: frozenset()}),
        (frozenset({1}), {1: frozenset({2}), 2: frozenset({1})}),
    ),
    3: (
        (frozenset({1}), {1: frozenset({2}), 2: frozenset({3}), 3: frozenset()}),
        (frozenset({1, 2, 3}), {1: frozenset(), 2: frozenset(), 3: frozenset()}),
        (frozenset({1}), {1: frozenset({2, 3}), 2: frozenset(), 3: frozenset()}),
        (frozenset({1, 2}), {1: frozenset({3}), 2: frozenset({3}), 3: frozenset()}),
        (frozenset({1, 2}), {1: frozenset({2, 3}), 2: frozenset({1}), 3: frozenset({1})}),
    ),
    4: (
        (frozenset({1}), {1: frozenset({2}), 2: frozenset({3}), 3: frozenset({4}), 4: frozenset()}),
        (frozenset({1, 2, 3, 4}), {1: frozenset(), 2: frozenset(), 3: frozenset(), 4: frozenset()}),
        (frozenset({1, 2}), {1: frozenset({3, 4}), 2: frozenset(), 3: frozenset(), 4: frozenset()}),
        (frozenset({1, 2}), {1: frozenset({3}), 2: frozenset({3}), 3: frozenset({4}), 4: frozenset()}),
        (frozenset({1}), {1: frozenset({2, 3}), 2: frozenset({4}), 3: frozenset({4}), 4: frozenset()}),
    ),
}

_SAMPLED_ASSIGNMENTS = {3: 25, 4: 12}


def _scenario(root: frozenset, nbrs: dict[int, frozenset], types) -> Scenario:
    agents = {
        i: AgentType(pmf=pmf, cost=cost, neighbors=nbrs[i])
        for i, (pmf, cost) in zip(sorted(nbrs), types)
    }
    return Scenario(requester_neighbors=root, agents=agents, quality_levels=LEVELS)


def micro_scenarios(seed: int = 0) -> Iterator[Scenario]:
    """The documented scenario family, in deterministic order."""
    rng = random.Random(f"diffmech-micro:{seed}")
    for n in (1, 2):
        for root, nbrs in _TOPOLOGIES[n]:
            for types in itertools.product(GRID_TYPES, repeat=n):
                yield _scenario(root, nbrs, types)
    for n in (3, 4):
        for root, nbrs in _TOPOLOGIES[n]:
            for _ in range(_SAMPLED_ASSIGNMENTS[n]):
                types = tuple(rng.choice(GRID_TYPES) for _ in range(n))
                yield _scenario(root, nbrs, types)


def full_deviations(scenario: Scenario, agent: int) -> list[Optional[Report]]:
    """Every report the agent could file in the closed world, truth first."""
    truth = scenario.agents[agent]
    truthful = Report(truth.pmf, truth.cost, truth.neighbors)
    workers = sorted(v for v in truth.neighbors if isinstance(v, int))
    subsets = [
        frozenset(sub)
        for r in range(len(workers) + 1)
        for sub in itertools.combinations(workers, r)
    ]
    out: list[Optional[Report]] = [truthful]
    for pmf, cost in GRID_TYPES:
        for invited in subsets:
            rep = Report(pmf, cost, invited)
            if rep != truthful:
                out.append(rep)
    out.append(None)
    return out


_EXTRA_RATIONALS = [expectation(p) for p in GRID_PMFS] + list(GRID_COSTS)


@dataclass(frozen=True)
class MicroResult:
    scenarios: int
    deviations: int
    witness: Optional[Witness]
    witness_scenario: Optional[Scenario]

    @property
    def ok(self) -> bool:
        return self.witness is None


def run_micro_suite(seed: int = 0) -> MicroResult:
    """Scan the whole family under the PEV mechanism; stop at any violation."""
    scenarios = 0
    deviations = 0
    for scenario in micro_scenarios(seed):
        scenarios += 1
        inst = _kernel.compile_instance(scenario, extra=_EXTRA_RATIONALS)
        truth = scenario.truthful_reports()
        prof = _kernel.compile_profile(inst, truth)
        for agent in scenario.worker_ids:
            devs = full_deviations(scenario, agent)
            encoded = [_kernel.encode_report(inst, agent, d) for d in devs]
            deviations += len(devs)
            best_j, best_u = _kernel.scan_deviations(
                inst, prof, agent, _kernel.MECH_PEV, encoded
            )
            truth_u = _kernel.agent_utility(inst, prof, agent, _kernel.MECH_PEV)
            if best_u > truth_u:
                # re-derive through the reference oracle before reporting
                trial = dict(truth)
                trial[agent] = devs[best_j]
                oracle_truth = expected_utility_oracle(scenario, truth, "pev", agent)
                oracle_dev = expected_utility_oracle(scenario, trial, "pev", agent)
                witness = Witness(agent, devs[best_j], None, oracle_truth, oracle_dev)
                return MicroResult(scenarios, deviations, witness, scenario)
    return MicroResult(scenarios, deviations, None, None)
