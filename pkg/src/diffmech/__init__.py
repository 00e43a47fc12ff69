"""Truthful diffusion mechanisms for single-task allocation on social networks.

A requester `s` needs one task done. Agents sit on a social network; each
has a private quality distribution (PoQ), a private cost, and private
neighbors she can invite. The mechanisms here reward agents both for
working and for forwarding the request, so that reporting everything
truthfully and inviting everyone is a dominant strategy, while the
requester never ends up worse off than doing nothing.

Library surface:

  poq          exact rational pmfs: parsing, expectation, sampling
  network      scenarios, reports, diffusion graphs, critical sequences
  mechanisms   PEV diffusion mechanism, IDM, quality-aware IDM, network VCG
  audit        IR / IC / WBB / lemma / efficiency-gap checks with witnesses
  sim          seeded Monte Carlo runs against the analytic expectations
  scenario_io  JSON scenario files, bundled examples, random generation
  cli          `diffmech run | audit | demo | gen`

All arithmetic is `fractions.Fraction`; the allocation rule's stopping test
is an exact equality, which floats cannot express.
"""

from __future__ import annotations

from ._kernel import backend_name
from .audit import (
    AuditReport,
    DeviationGrid,
    Witness,
    check_efficiency_gap,
    check_ic,
    check_ir,
    check_lemmas,
    check_wbb,
    expected_payoff_profile,
    expected_utility_oracle,
    grid_for,
    replay_witness,
    run_audits,
)
from .mechanisms import (
    Allocation,
    MechanismError,
    MechanismOutcome,
    PayoffVector,
    efficient_allocation,
    expected_utilities,
    idm_run,
    pev_allocate,
    pev_payoffs,
    payoff_schedule,
    qaidm_allocate,
    qaidm_payoffs,
    qaidm_run,
    uniform_quality,
    vcg_run,
)
from .network import (
    REQUESTER,
    AgentType,
    CriticalSequence,
    DiffusionGraph,
    Report,
    Scenario,
    ScenarioError,
    build_graph,
    candidates,
    critical_sequence,
    participants,
    without_agent,
)
from .poq import Pmf, RationalParseError, expectation, expected_welfare, format_rational, parse_rational
from .scenario_io import (
    ScenarioFileError,
    bundled_names,
    dump_scenario,
    generate_scenario,
    load_bundled,
    load_scenario,
    parse_scenario_text,
)
from .micro import run_micro_suite
from .sim import TrialStats, analytic_moments, compare, run_trials

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "AgentType",
    "AuditReport",
    "CriticalSequence",
    "DeviationGrid",
    "DiffusionGraph",
    "MechanismError",
    "MechanismOutcome",
    "PayoffVector",
    "Pmf",
    "RationalParseError",
    "REQUESTER",
    "Report",
    "Scenario",
    "ScenarioError",
    "ScenarioFileError",
    "TrialStats",
    "Witness",
    "analytic_moments",
    "backend_name",
    "build_graph",
    "bundled_names",
    "candidates",
    "check_efficiency_gap",
    "check_ic",
    "check_ir",
    "check_lemmas",
    "check_wbb",
    "compare",
    "critical_sequence",
    "dump_scenario",
    "efficient_allocation",
    "expectation",
    "expected_payoff_profile",
    "expected_utilities",
    "expected_utility_oracle",
    "expected_welfare",
    "format_rational",
    "generate_scenario",
    "grid_for",
    "idm_run",
    "load_bundled",
    "load_scenario",
    "parse_rational",
    "parse_scenario_text",
    "participants",
    "payoff_schedule",
    "pev_allocate",
    "pev_payoffs",
    "qaidm_allocate",
    "qaidm_payoffs",
    "qaidm_run",
    "replay_witness",
    "run_audits",
    "run_micro_suite",
    "run_trials",
    "uniform_quality",
    "vcg_run",
    "without_agent",
    "__version__",
]
