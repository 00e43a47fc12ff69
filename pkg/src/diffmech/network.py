"""Social network model: agent types, report profiles, diffusion reachability.

The requester is the sentinel `REQUESTER` (printed "s"), never a worker id.
Invitations induce a directed graph: an edge s->i for every declared
requester neighbor, and i->j for every j a reporting agent i invited.
Participants are the workers reachable from s along those edges; an agent
whose report is nil contributes no out-edges, so nobody is reached through
her, but she can still be reached (the requester's own edges always exist).
Mechanisms never allocate to a nil agent; the `candidates` helper is the
participant set restricted to agents that actually filed a report.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Union

from .poq import Pmf, format_rational


class _Requester:
    """Singleton sentinel for the task requester."""

    __slots__ = ()
    _instance: Optional["_Requester"] = None

    def __new__(cls) -> "_Requester":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "s"


REQUESTER = _Requester()

AgentId = int
NodeId = Union[int, _Requester]


class ScenarioError(ValueError):
    """Structural problem in a scenario or report profile."""


@dataclass(frozen=True)
class AgentType:
    """True type: quality distribution, cost, and neighbor set."""

    pmf: Pmf
    cost: Fraction
    neighbors: frozenset[NodeId]


@dataclass(frozen=True)
class Report:
    """A filed report. Absence of a report (nil) is represented by None."""

    pmf: Pmf
    cost: Fraction
    invited: frozenset[NodeId]


# Profile of declared behavior: one entry per worker, None meaning nil.
ReportProfile = Mapping[AgentId, Optional[Report]]


@dataclass(frozen=True)
class Scenario:
    """Ground truth: the requester's neighbors, all true types, the quality level set."""

    requester_neighbors: frozenset[AgentId]
    agents: Mapping[AgentId, AgentType]
    quality_levels: frozenset[Fraction]

    def __post_init__(self) -> None:
        ids = set(self.agents)
        for i in ids:
            if not isinstance(i, int) or i < 0:
                raise ScenarioError(f"agent id {i!r} is not a small nonnegative integer")
        for i in self.requester_neighbors:
            if i not in ids:
                raise ScenarioError(f"requester neighbor {i} is not a declared agent")
        levels = set(self.quality_levels)
        for q in levels:
            if q < 0:
                raise ScenarioError(f"negative quality level {format_rational(q)}")
        for i, t in self.agents.items():
            if t.cost < 0:
                raise ScenarioError(f"agent {i}: negative cost")
            if i in t.neighbors:
                raise ScenarioError(f"agent {i}: neighbor set contains itself")
            for j in t.neighbors:
                if j is not REQUESTER and j not in ids:
                    raise ScenarioError(f"agent {i}: unknown neighbor {j}")
            for q in t.pmf.support:
                if q not in levels:
                    raise ScenarioError(
                        f"agent {i}: pmf quality {format_rational(q)} not in quality_levels"
                    )

    @property
    def worker_ids(self) -> tuple[AgentId, ...]:
        return tuple(sorted(self.agents))

    def truthful_reports(self) -> dict[AgentId, Report]:
        """The profile where every agent declares her true type and invites everyone."""
        return {
            i: Report(pmf=t.pmf, cost=t.cost, invited=t.neighbors)
            for i, t in self.agents.items()
        }


def validate_reports(scenario: Scenario, reports: ReportProfile) -> None:
    """Check the structural constraints a report profile must satisfy.

    Misreported pmfs and costs are legal (that is the point of the model);
    the only structural constraints are that invited sets stay inside the
    true neighbor set, costs are nonnegative, and pmfs range over the
    scenario's quality levels.
    """
    for i, rep in reports.items():
        if i not in scenario.agents:
            raise ScenarioError(f"report for unknown agent {i}")
        if rep is None:
            continue
        if rep.cost < 0:
            raise ScenarioError(f"agent {i}: reported cost is negative")
        extra = rep.invited - scenario.agents[i].neighbors
        if extra:
            raise ScenarioError(
                f"agent {i}: invited {sorted(map(str, extra))} outside true neighbor set"
            )
        for q in rep.pmf.support:
            if q not in scenario.quality_levels:
                raise ScenarioError(
                    f"agent {i}: reported quality {format_rational(q)} not in quality_levels"
                )


@dataclass(frozen=True)
class DiffusionGraph:
    """Directed invitation graph induced by a report profile."""

    workers: tuple[AgentId, ...]
    root_edges: frozenset[AgentId]  # out-edges of s
    out_edges: Mapping[AgentId, frozenset[AgentId]]  # worker -> invited workers


def build_graph(scenario: Scenario, reports: ReportProfile) -> DiffusionGraph:
    """Induce the diffusion graph: s's edges plus each reporting agent's invitations.

    Edges pointing back at s are dropped (they cannot affect reachability
    from s); a nil report contributes no out-edges.
    """
    ids = set(scenario.agents)
    out: dict[AgentId, frozenset[AgentId]] = {}
    for i in sorted(ids):
        rep = reports.get(i)
        if rep is None:
            out[i] = frozenset()
            continue
        targets = set()
        for j in rep.invited:
            if j is REQUESTER:
                continue
            if j not in ids:
                raise ScenarioError(f"agent {i} invited unknown agent {j}")
            targets.add(j)
        out[i] = frozenset(targets)
    return DiffusionGraph(
        workers=tuple(sorted(ids)),
        root_edges=frozenset(scenario.requester_neighbors),
        out_edges=out,
    )


def reachable(graph: DiffusionGraph, removed: Iterable[AgentId] = ()) -> frozenset[AgentId]:
    """Workers reachable from s, with the given nodes deleted from the graph."""
    gone = set(removed)
    seen: set[AgentId] = set()
    frontier = [i for i in graph.root_edges if i not in gone]
    seen.update(frontier)
    while frontier:
        nxt = []
        for v in frontier:
            for w in graph.out_edges[v]:
                if w not in gone and w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return frozenset(seen)


def participants(graph: DiffusionGraph) -> frozenset[AgentId]:
    """All workers reachable from s; never contains s itself."""
    return reachable(graph)


def candidates(graph: DiffusionGraph, reports: ReportProfile) -> frozenset[AgentId]:
    """Participants that filed a report, i.e. the agents a mechanism may select."""
    return frozenset(i for i in reachable(graph) if reports.get(i) is not None)


def without_agent(reports: ReportProfile, i: AgentId) -> dict[AgentId, Optional[Report]]:
    """The profile with agent i's report replaced by nil.

    Downstream, i neither forwards invitations nor stands as a candidate;
    for reachability this is node deletion.
    """
    if i is REQUESTER or not isinstance(i, int):
        raise ScenarioError("cannot nil the requester")
    if i not in reports:
        raise ScenarioError(f"no such agent {i} in the report profile")
    out = dict(reports)
    out[i] = None
    return out


@dataclass(frozen=True)
class CriticalSequence:
    """Critical agents of a target ordered by nested dominance, s first, target last."""

    target: AgentId
    order: tuple[NodeId, ...]

    @property
    def members(self) -> tuple[AgentId, ...]:
        """Sequence members excluding s (i_1 ... i_m, with i_m the target)."""
        return tuple(i for i in self.order if i is not REQUESTER)

    def __str__(self) -> str:
        return "(" + ", ".join(str(i) for i in self.order) + ")"


def critical_sequence(graph: DiffusionGraph, target: AgentId) -> CriticalSequence:
    """Critical agents of `target` via node deletion + reachability.

    An agent v is critical for the target when deleting v disconnects s from
    the target. Dominance (v before u iff v is critical for u) is read off
    the same reachability sets: v dominates u iff u is unreachable without v.
    The resulting order is total; a tie would mean the graph logic is broken,
    so it is asserted.
    """
    if target not in reachable(graph):
        raise ScenarioError(f"target {target} is not reachable from s")
    crit: dict[AgentId, frozenset[AgentId]] = {}
    for v in graph.workers:
        if v == target:
            continue
        rest = reachable(graph, removed=(v,))
        if target not in rest:
            crit[v] = rest
    ranked = sorted(
        crit,
        key=lambda v: (-sum(1 for u in crit if u != v and u not in crit[v]), v),
    )
    for pos, v in enumerate(ranked):
        dominated = sum(1 for u in crit if u != v and u not in crit[v])
        assert dominated == len(ranked) - 1 - pos, "dominance order is not total"
    return CriticalSequence(target=target, order=(REQUESTER, *ranked, target))


def critical_set_by_paths(graph: DiffusionGraph, target: AgentId) -> frozenset[AgentId]:
    """Brute-force cross-check: intersect the vertex sets of all simple s->target paths.

    Exponential; used as the independent oracle for `critical_sequence` on
    small graphs.
    """
    if target not in reachable(graph):
        raise ScenarioError(f"target {target} is not reachable from s")
    common: set[AgentId] | None = None

    def walk(v: AgentId, path: set[AgentId]) -> None:
        nonlocal common
        if v == target:
            common = set(path) if common is None else common & path
            return
        for w in sorted(graph.out_edges[v]):
            if w not in path:
                path.add(w)
                walk(w, path)
                path.discard(w)

    for start in sorted(graph.root_edges):
        walk(start, {start})
    assert common is not None
    return frozenset(common)
