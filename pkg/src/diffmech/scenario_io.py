"""Scenario files: JSON parsing, serialization, bundled scenarios, generation.

A scenario file is a JSON object with:

  quality_levels       list of rational strings (or ints)
  requester_neighbors  list of agent ids
  agents               list of {id, cost, pmf, neighbors}; pmf is a list of
                       [quality, probability] rational-string pairs; a
                       neighbor entry is an agent id or the string "s"
  reports              optional map id -> "nil" | {pmf?, cost?, invited?};
                       omitted agents and omitted fields default to truth

Rationals must be exact: fraction strings ("3/10"), decimal strings
("0.3"), or ints. JSON floats are rejected. Parse errors name the offending
field and agent id.

The bundled scenarios reconstruct the published worked examples. The
figures behind them are drawings, so their full edge lists are not in the
text; each loader re-derives the published quantities (welfare table,
critical sequences, removal welfares) and refuses to load a reconstruction
that breaks any of them.
"""

from __future__ import annotations

import json
import random
from fractions import Fraction
from importlib import resources
from typing import Any, Optional

from . import mechanisms
from .network import (
    REQUESTER,
    AgentType,
    NodeId,
    Report,
    ReportProfile,
    Scenario,
    ScenarioError,
    build_graph,
    critical_sequence,
    validate_reports,
    without_agent,
)
from .poq import (
    Pmf,
    RationalParseError,
    expectation,
    expected_welfare,
    format_rational,
    parse_rational,
    validate_pmf,
)


class ScenarioFileError(ValueError):
    """A scenario file is malformed; the message names the field."""


def _rational(value: Any, field: str) -> Fraction:
    try:
        return parse_rational(value)
    except RationalParseError as exc:
        raise ScenarioFileError(f"{field}: {exc}") from exc


def _agent_id(value: Any, field: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ScenarioFileError(f"{field}: expected a nonnegative integer agent id, got {value!r}")
    return value


def _neighbor(value: Any, field: str) -> NodeId:
    if value == "s":
        return REQUESTER
    return _agent_id(value, field)


def _pmf(value: Any, field: str) -> Pmf:
    if not isinstance(value, list) or not all(
        isinstance(pair, list) and len(pair) == 2 for pair in value
    ):
        raise ScenarioFileError(f"{field}: expected a list of [quality, probability] pairs")
    pairs = [
        (_rational(q, f"{field}[{k}] quality"), _rational(p, f"{field}[{k}] probability"))
        for k, (q, p) in enumerate(value)
    ]
    problem = validate_pmf(sorted(pairs))
    if problem is not None:
        raise ScenarioFileError(f"{field}: {problem}")
    return Pmf.from_pairs(pairs)


def _require_keys(obj: dict, allowed: set[str], required: set[str], field: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioFileError(f"{field}: unknown key(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ScenarioFileError(f"{field}: missing key(s) {sorted(missing)}")


def parse_scenario_text(text: str) -> tuple[Scenario, dict[int, Optional[Report]]]:
    """Parse scenario JSON into a validated Scenario and report profile.

    The returned profile has one entry per agent; with no reports block it
    is the fully truthful profile.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioFileError("top level: expected a JSON object")
    _require_keys(
        doc,
        allowed={"quality_levels", "requester_neighbors", "agents", "reports", "comment"},
        required={"quality_levels", "requester_neighbors", "agents"},
        field="top level",
    )

    levels = frozenset(
        _rational(v, f"quality_levels[{k}]") for k, v in enumerate(doc["quality_levels"])
    )
    root = frozenset(
        _agent_id(v, f"requester_neighbors[{k}]")
        for k, v in enumerate(doc["requester_neighbors"])
    )

    agents: dict[int, AgentType] = {}
    if not isinstance(doc["agents"], list):
        raise ScenarioFileError("agents: expected a list")
    for entry in doc["agents"]:
        if not isinstance(entry, dict):
            raise ScenarioFileError("agents: each entry must be an object")
        _require_keys(
            entry,
            allowed={"id", "cost", "pmf", "neighbors", "comment"},
            required={"id", "cost", "pmf", "neighbors"},
            field="agents entry",
        )
        i = _agent_id(entry["id"], "agents entry id")
        if i in agents:
            raise ScenarioFileError(f"agent {i}: duplicate id")
        where = f"agent {i}"
        agents[i] = AgentType(
            pmf=_pmf(entry["pmf"], f"{where} pmf"),
            cost=_rational(entry["cost"], f"{where} cost"),
            neighbors=frozenset(
                _neighbor(v, f"{where} neighbors[{k}]")
                for k, v in enumerate(entry["neighbors"])
            ),
        )
    scenario = Scenario(requester_neighbors=root, agents=agents, quality_levels=levels)

    reports: dict[int, Optional[Report]] = dict(scenario.truthful_reports())
    block = doc.get("reports", {})
    if not isinstance(block, dict):
        raise ScenarioFileError("reports: expected an object keyed by agent id")
    for key, override in block.items():
        try:
            i = int(key)
        except ValueError:
            raise ScenarioFileError(f"reports key {key!r}: not an agent id") from None
        if i not in agents:
            raise ScenarioFileError(f"reports: no such agent {i}")
        where = f"reports[{i}]"
        if override == "nil":
            reports[i] = None
            continue
        if not isinstance(override, dict):
            raise ScenarioFileError(f'{where}: expected "nil" or an object')
        _require_keys(
            override, allowed={"pmf", "cost", "invited", "comment"}, required=set(), field=where
        )
        truth = agents[i]
        reports[i] = Report(
            pmf=_pmf(override["pmf"], f"{where} pmf") if "pmf" in override else truth.pmf,
            cost=_rational(override["cost"], f"{where} cost")
            if "cost" in override
            else truth.cost,
            invited=frozenset(
                _neighbor(v, f"{where} invited[{k}]")
                for k, v in enumerate(override["invited"])
            )
            if "invited" in override
            else truth.neighbors,
        )
    validate_reports(scenario, reports)
    return scenario, reports


def load_scenario(path: str) -> tuple[Scenario, dict[int, Optional[Report]]]:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario_text(fh.read())


def _node_json(v: NodeId) -> Any:
    return "s" if v is REQUESTER else v


def _node_sort_key(v: NodeId) -> tuple[int, int]:
    return (0, -1) if v is REQUESTER else (1, v)


def scenario_to_dict(
    scenario: Scenario, reports: Optional[ReportProfile] = None
) -> dict[str, Any]:
    """JSON-ready dict; includes a reports block only for non-truthful entries."""
    doc: dict[str, Any] = {
        "quality_levels": [format_rational(q) for q in sorted(scenario.quality_levels)],
        "requester_neighbors": sorted(scenario.requester_neighbors),
        "agents": [
            {
                "id": i,
                "cost": format_rational(t.cost),
                "pmf": [[format_rational(q), format_rational(p)] for q, p in t.pmf.points],
                "neighbors": [
                    _node_json(v) for v in sorted(t.neighbors, key=_node_sort_key)
                ],
            }
            for i, t in sorted(scenario.agents.items())
        ],
    }
    if reports is not None:
        truth = scenario.truthful_reports()
        block: dict[str, Any] = {}
        for i in scenario.worker_ids:
            rep = reports.get(i)
            if rep == truth[i]:
                continue
            if rep is None:
                block[str(i)] = "nil"
            else:
                block[str(i)] = {
                    "pmf": [[format_rational(q), format_rational(p)] for q, p in rep.pmf.points],
                    "cost": format_rational(rep.cost),
                    "invited": [_node_json(v) for v in sorted(rep.invited, key=_node_sort_key)],
                }
        if block:
            doc["reports"] = block
    return doc


def dump_scenario(scenario: Scenario, reports: Optional[ReportProfile] = None) -> str:
    """Deterministic serialization: same inputs, same bytes."""
    return json.dumps(scenario_to_dict(scenario, reports), indent=2, sort_keys=False) + "\n"


# --- bundled scenarios ---------------------------------------------------


def bundled_names() -> tuple[str, ...]:
    return tuple(sorted(_BUNDLED_CHECKS))


def load_bundled(name: str) -> tuple[Scenario, dict[int, Optional[Report]]]:
    """Load a bundled scenario and re-derive its published values.

    The topology in each file is a reconstruction; the check functions make
    a wrong reconstruction fail at load time rather than downstream.
    """
    if name not in _BUNDLED_CHECKS:
        raise ScenarioFileError(
            f"no bundled scenario {name!r}; available: {', '.join(bundled_names())}"
        )
    text = (resources.files("diffmech") / "scenarios" / f"{name}.json").read_text("utf-8")
    scenario, reports = parse_scenario_text(text)
    _BUNDLED_CHECKS[name](scenario)
    return scenario, reports


def _check(cond: bool, what: str) -> None:
    if not cond:
        raise ScenarioFileError(f"bundled scenario self-check failed: {what}")


def _removal_welfare(scenario: Scenario, i: int) -> Fraction:
    truth = scenario.truthful_reports()
    return mechanisms.efficient_allocation(scenario, without_agent(truth, i)).welfare


def _check_example2(scenario: Scenario) -> None:
    F = Fraction
    welfare = {
        1: F(2), 2: F(4, 5), 3: F(4), 4: F(2), 5: F(18, 5),
        6: F(31, 10), 7: F(14, 5), 8: F(13, 5), 9: F(37, 5), 10: F(9, 2),
    }
    truth = scenario.truthful_reports()
    for i, w in welfare.items():
        got = expected_welfare(truth[i].pmf, truth[i].cost)
        _check(got == w, f"agent {i} welfare {got} != {w}")
    graph = build_graph(scenario, truth)
    seq = critical_sequence(graph, 9)
    _check(seq.members == (2, 6, 9), f"critical sequence of 9 is {seq}")
    _check(_removal_welfare(scenario, 2) == 4, "removal welfare of 2")
    _check(_removal_welfare(scenario, 6) == 4, "removal welfare of 6")
    _check(_removal_welfare(scenario, 9) == F(9, 2), "removal welfare of 9")


def _check_figure1(scenario: Scenario) -> None:
    F = Fraction
    _check(scenario.quality_levels == frozenset({F(1)}), "quality level set {1}")
    _check(scenario.requester_neighbors == frozenset({1, 2, 3}), "requester neighbors")
    _check(scenario.agents[2].cost == F(3, 5), "cost of agent 2")
    _check(scenario.agents[4].cost == F(1, 10), "cost of agent 4")
    truth = scenario.truthful_reports()
    seq = critical_sequence(build_graph(scenario, truth), 4)
    _check(seq.members == (1, 4), "agent 4 reachable only through agent 1")
    _check(_removal_welfare(scenario, 1) == F(2, 5), "removal welfare of 1")
    _check(_removal_welfare(scenario, 4) == F(2, 5), "removal welfare of 4")
    best = mechanisms.efficient_allocation(scenario, truth)
    _check(best.allocation.selected == 4 and best.welfare == F(9, 10), "best welfare 9/10")


def _check_figure5(scenario: Scenario) -> None:
    truth = scenario.truthful_reports()
    w1 = expected_welfare(truth[1].pmf, truth[1].cost)
    w2 = expected_welfare(truth[2].pmf, truth[2].cost)
    _check(w2 > w1 > 0, "welfare ordering of the two agents")
    seq = critical_sequence(build_graph(scenario, truth), 2)
    _check(seq.members == (1, 2), "agent 2 reachable only through agent 1")
    _check(_removal_welfare(scenario, 2) == w1, "removal welfare of 2")


def _check_qaidm_failure(scenario: Scenario) -> None:
    truth = scenario.truthful_reports()
    outcome = mechanisms.pev_allocate(scenario, truth)
    _check(outcome.selected == 2, "truthful champion is agent 2")
    top = max(scenario.quality_levels)
    _check(
        top > expectation(scenario.agents[2].pmf) > expectation(scenario.agents[1].pmf),
        "inflation headroom",
    )


_BUNDLED_CHECKS = {
    "example2": _check_example2,
    "figure1": _check_figure1,
    "figure5": _check_figure5,
    "qaidm_failure": _check_qaidm_failure,
}


# --- generation ----------------------------------------------------------


def generate_scenario(
    n_agents: int,
    *,
    n_levels: int = 3,
    density: float = 0.3,
    seed: int = 0,
    degenerate: bool = False,
) -> Scenario:
    """Random scenario, connected from s under truthful reporting.

    Deterministic in the arguments: the topology is a random tree rooted at
    s plus density-controlled extra symmetric edges; costs sit on a 1/10
    grid; pmf probabilities are 1/10-grid compositions. With degenerate=True
    every agent gets the same point-mass pmf (the uniform-quality setting).
    """
    if n_agents < 1:
        raise ValueError("n_agents must be >= 1")
    if not 1 <= n_levels <= 8:
        raise ValueError("n_levels must be in 1..8")
    rng = random.Random(f"diffmech-gen:{n_agents}:{n_levels}:{density}:{degenerate}:{seed}")
    ids = list(range(1, n_agents + 1))
    level_pool = [Fraction(k, 10) for k in range(5, 81, 5)]
    levels = sorted(rng.sample(level_pool, n_levels))

    neighbors: dict[int, set[NodeId]] = {i: set() for i in ids}
    root: set[int] = set()

    def connect(a: int, b: NodeId) -> None:
        if b is REQUESTER:
            root.add(a)
            neighbors[a].add(REQUESTER)
        else:
            neighbors[a].add(b)
            neighbors[b].add(a)  # type: ignore[index]

    for k, i in enumerate(ids):
        parent: NodeId = REQUESTER if k == 0 else rng.choice([REQUESTER, *ids[:k]])
        connect(i, parent)
    for a in ids:
        for b in ids:
            if b <= a:
                continue
            if rng.random() < density:
                connect(a, b)
        if rng.random() < density / 2:
            connect(a, REQUESTER)

    if degenerate:
        q = rng.choice(levels)
        pmfs = {i: Pmf.point_mass(q) for i in ids}
    else:
        pmfs = {}
        for i in ids:
            k = rng.randint(1, min(3, n_levels))
            support = sorted(rng.sample(levels, k))
            cuts = sorted(rng.sample(range(1, 10), k - 1))
            weights = [b - a for a, b in zip([0] + cuts, cuts + [10])]
            pmfs[i] = Pmf.from_pairs(
                [(q, Fraction(w, 10)) for q, w in zip(support, weights)]
            )
    agents = {
        i: AgentType(
            pmf=pmfs[i],
            cost=Fraction(rng.randint(0, 12), 10),
            neighbors=frozenset(neighbors[i]),
        )
        for i in ids
    }
    return Scenario(
        requester_neighbors=frozenset(root),
        agents=agents,
        quality_levels=frozenset(levels),
    )
