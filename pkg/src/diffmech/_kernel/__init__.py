"""Hot-loop kernel: scaled-integer mechanism evaluation with two backends.

The deviation audits evaluate the mechanism hundreds of thousands of times
on one scenario. This package compiles a scenario once into dense indices,
bitmask adjacency, and integers at a single common denominator, then
evaluates one agent's expected utility per profile in that representation.

Backends: `_speedups` (Cython, int64) when built, else `purepy` (identical
algorithm on Python ints). `DIFFMECH_PURE=1` forces the fallback. The
compiled backend is also skipped per instance when the scaled values could
approach int64 range; the pure backend has no such limit.

Exactness is preserved, not approximated: with every rational in play a
multiple of 1/scale, welfare comparisons and the allocation rule's equality
test are integer operations with no rounding anywhere. Callers must pass
every off-scenario rational they will later encode (deviation costs, grid
pmf expectations) as `extra` values at compile time so the common scale
covers them.
"""

from __future__ import annotations

import os
from array import array
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterable, Optional, Sequence

from ..network import REQUESTER, Report, ReportProfile, Scenario
from ..poq import expectation
from . import purepy

MECH_PEV = purepy.MECH_PEV
MECH_QAIDM = purepy.MECH_QAIDM

# Leave int64 plenty of headroom: utilities are differences of a few terms.
_COMPILED_BOUND = 1 << 40

_FORCE_PURE = os.environ.get("DIFFMECH_PURE", "") not in ("", "0")

if _FORCE_PURE:
    _speedups = None
else:
    try:
        from . import _speedups  # type: ignore[attr-defined]
    except ImportError:
        _speedups = None


def backend_name() -> str:
    """"compiled" when the Cython extension is loaded, else "pure"."""
    return "pure" if _speedups is None else "compiled"


class KernelUnavailable(Exception):
    """This scenario or value cannot use the kernel; use the reference path."""


@dataclass(frozen=True)
class KernelInstance:
    """A scenario frozen into kernel form; profiles are encoded against it."""

    scenario: Scenario = field(repr=False)
    ids: tuple[int, ...]  # external worker ids, ascending; internal id = position
    n: int
    scale: int
    root_mask: int
    true_invite: tuple[int, ...]  # true neighbor masks (workers only)
    true_expq: tuple[int, ...]  # scaled
    true_cost: tuple[int, ...]  # scaled
    compiled_ok: bool  # int64 backend safe for this instance

    @property
    def index(self) -> dict[int, int]:
        return {e: k for k, e in enumerate(self.ids)}

    def scaled(self, value: Fraction) -> int:
        if self.scale % value.denominator:
            raise KernelUnavailable(
                f"value {value} is not on the instance scale 1/{self.scale}"
            )
        out = value.numerator * (self.scale // value.denominator)
        if abs(out) >= _COMPILED_BOUND and self.compiled_ok:
            raise KernelUnavailable(f"value {value} exceeds the compiled-range bound")
        return out

    def unscaled(self, value: int) -> Fraction:
        return Fraction(value, self.scale)


@dataclass
class CompiledProfile:
    """Parallel per-worker arrays; `out` is 0 wherever the nil bit is set."""

    out: list[int]
    nilm: int
    welf: list[int]
    expq: list[int]


def compile_instance(
    scenario: Scenario, extra: Iterable[Fraction] = ()
) -> KernelInstance:
    ids = scenario.worker_ids
    n = len(ids)
    if n == 0 or n > 63:
        raise KernelUnavailable(f"kernel supports 1..63 workers, scenario has {n}")
    index = {e: k for k, e in enumerate(ids)}

    seen: list[Fraction] = list(scenario.quality_levels)
    for t in scenario.agents.values():
        seen.append(expectation(t.pmf))
        seen.append(t.cost)
    seen.extend(extra)
    scale = lcm(*(v.denominator for v in seen), 1)
    # utilities are short signed sums of scaled terms; 4x headroom is ample
    bound = max((abs(v) for v in seen), default=Fraction(0)) * 4 * scale
    compiled_ok = _speedups is not None and bound < _COMPILED_BOUND and scale < _COMPILED_BOUND

    def mask(nodes: Iterable[object]) -> int:
        m = 0
        for v in nodes:
            if v is REQUESTER:
                continue
            m |= 1 << index[v]  # type: ignore[index]
        return m

    inst = KernelInstance(
        scenario=scenario,
        ids=ids,
        n=n,
        scale=scale,
        root_mask=mask(scenario.requester_neighbors),
        true_invite=tuple(mask(scenario.agents[e].neighbors) for e in ids),
        true_expq=(),
        true_cost=(),
        compiled_ok=compiled_ok,
    )
    # scaled() needs the instance for the scale; fill the arrays afterwards
    object.__setattr__(
        inst, "true_expq", tuple(inst.scaled(expectation(scenario.agents[e].pmf)) for e in ids)
    )
    object.__setattr__(
        inst, "true_cost", tuple(inst.scaled(scenario.agents[e].cost) for e in ids)
    )
    return inst


def encode_report(
    inst: KernelInstance, ext_id: int, report: Optional[Report]
) -> tuple[int, int, int, int]:
    """Encode one report as (out_mask, nil, scaled welfare, scaled expectation)."""
    if report is None:
        return (0, 1, 0, 0)
    index = inst.index
    m = 0
    for v in report.invited:
        if v is not REQUESTER:
            m |= 1 << index[v]  # type: ignore[index]
    e = inst.scaled(expectation(report.pmf))
    return (m, 0, e - inst.scaled(report.cost), e)


def compile_profile(inst: KernelInstance, reports: ReportProfile) -> CompiledProfile:
    out: list[int] = []
    welf: list[int] = []
    expq: list[int] = []
    nilm = 0
    for k, e in enumerate(inst.ids):
        o, nil, w, x = encode_report(inst, e, reports.get(e))
        out.append(o)
        welf.append(w)
        expq.append(x)
        if nil:
            nilm |= 1 << k
    return CompiledProfile(out=out, nilm=nilm, welf=welf, expq=expq)


def agent_utility(
    inst: KernelInstance, prof: CompiledProfile, ext_agent: int, mech: int
) -> Fraction:
    """Expected utility of one agent under one encoded profile, exact."""
    a = inst.index[ext_agent]
    if inst.compiled_ok:
        raw = _speedups.agent_utility(  # type: ignore[union-attr]
            inst.n,
            inst.root_mask,
            array("Q", prof.out),
            prof.nilm,
            array("q", prof.welf),
            array("q", prof.expq),
            array("q", inst.true_expq),
            array("q", inst.true_cost),
            a,
            mech,
        )
    else:
        raw = purepy.agent_utility(
            inst.n,
            inst.root_mask,
            prof.out,
            prof.nilm,
            prof.welf,
            prof.expq,
            inst.true_expq,
            inst.true_cost,
            a,
            mech,
        )
    return inst.unscaled(raw)


def scan_deviations(
    inst: KernelInstance,
    prof: CompiledProfile,
    ext_agent: int,
    mech: int,
    devs: Sequence[tuple[int, int, int, int]],
) -> tuple[int, Fraction]:
    """Best deviation index and its exact utility for one agent.

    `devs` entries are encode_report tuples; ties resolve to the first
    index, so callers should put the truthful report at position 0 when
    they want "no strict improvement" to mean "index 0 wins".
    """
    a = inst.index[ext_agent]
    if inst.compiled_ok:
        j, raw = _speedups.scan_deviations(  # type: ignore[union-attr]
            inst.n,
            inst.root_mask,
            array("Q", prof.out),
            prof.nilm,
            array("q", prof.welf),
            array("q", prof.expq),
            array("q", inst.true_expq),
            array("q", inst.true_cost),
            a,
            mech,
            array("Q", [d[0] for d in devs]),
            array("B", [d[1] for d in devs]),
            array("q", [d[2] for d in devs]),
            array("q", [d[3] for d in devs]),
        )
    else:
        j, raw = purepy.scan_deviations(
            inst.n,
            inst.root_mask,
            list(prof.out),
            prof.nilm,
            list(prof.welf),
            list(prof.expq),
            inst.true_expq,
            inst.true_cost,
            a,
            mech,
            [d[0] for d in devs],
            [d[1] for d in devs],
            [d[2] for d in devs],
            [d[3] for d in devs],
        )
    return j, inst.unscaled(raw)
