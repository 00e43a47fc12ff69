"""Pure-Python evaluation kernel: bitmask graphs, scaled-integer welfares.

This is the fallback for (and the semantic reference of) the compiled
kernel in `_speedups.pyx`. Both operate on the same encoding:

  - workers are dense indices 0..n-1 (n <= 63), masks are Python ints;
  - every rational is pre-scaled to an integer at a common denominator, so
    the allocation rule's exact equality test is integer equality;
  - a profile is four parallel arrays: out[i] = invitation mask (MUST be 0
    for a nil report), nil bit, welf[i] = scaled reported welfare,
    expq[i] = scaled reported expected quality.

The only quantity computed is one agent's expected utility under one
profile; the deviation scan loops that computation with the agent's own
entries substituted. Using arbitrary-precision ints here means no overflow
concerns; the compiled twin guards its 64-bit range at instance compile
time instead.
"""

from __future__ import annotations

from typing import Sequence

MECH_PEV = 0  # selected agent paid on TRUE expected quality (pev/idm)
MECH_QAIDM = 1  # selected agent paid on REPORTED expected quality


def _reach(root: int, out: Sequence[int], removed: int) -> int:
    """Workers reachable from s with `removed` nodes deleted."""
    alive = ~removed
    reach = root & alive
    frontier = reach
    while frontier:
        nxt = 0
        f = frontier
        while f:
            v = (f & -f).bit_length() - 1
            f &= f - 1
            nxt |= out[v]
        nxt &= alive & ~reach
        reach |= nxt
        frontier = nxt
    return reach


def agent_utility(
    n: int,
    root: int,
    out: Sequence[int],
    nilm: int,
    welf: Sequence[int],
    expq: Sequence[int],
    true_expq: Sequence[int],
    true_cost: Sequence[int],
    agent: int,
    mech: int,
) -> int:
    """Scaled expected utility of `agent` under the encoded profile."""
    reach = _reach(root, out, 0)
    cand = reach & ~nilm
    if cand == 0:
        return 0
    champ = -1
    best = 0
    m = cand
    while m:  # ascending index order, so strict > keeps the smallest id on ties
        v = (m & -m).bit_length() - 1
        m &= m - 1
        if champ < 0 or welf[v] > best:
            champ, best = v, welf[v]
    if best < 0:
        return 0

    crit: list[tuple[int, int]] = []  # (node, reach mask without it)
    m = reach & ~(1 << champ)
    while m:
        v = (m & -m).bit_length() - 1
        m &= m - 1
        rw = _reach(root, out, 1 << v)
        if not (rw >> champ) & 1:
            crit.append((v, rw))
    scored = sorted(
        (-sum(1 for u, _ in crit if u != v and not (rw >> u) & 1), v) for v, rw in crit
    )
    members = [v for _, v in scored] + [champ]

    w: list[int] = []
    for v in members:
        rw = _reach(root, out, 1 << v)
        cw = rw & ~nilm & ~(1 << v)
        best_w = 0  # the null option floors removal welfare at 0
        mm = cw
        while mm:
            u = (mm & -mm).bit_length() - 1
            mm &= mm - 1
            if welf[u] > best_w:
                best_w = welf[u]
        w.append(best_w)

    t = len(members)
    for k in range(len(members) - 1):
        if welf[members[k]] == w[k + 1]:
            t = k + 1
            break

    sel = members[t - 1]
    if agent == sel:
        promised = expq[agent] if mech == MECH_QAIDM else true_expq[agent]
        return promised - w[t - 1] - true_cost[agent]
    for k in range(t - 1):
        if members[k] == agent:
            return w[k + 1] - w[k]
    return 0


def scan_deviations(
    n: int,
    root: int,
    out: list[int],
    nilm: int,
    welf: list[int],
    expq: list[int],
    true_expq: Sequence[int],
    true_cost: Sequence[int],
    agent: int,
    mech: int,
    dev_out: Sequence[int],
    dev_nil: Sequence[int],
    dev_welf: Sequence[int],
    dev_expq: Sequence[int],
) -> tuple[int, int]:
    """Best deviation for `agent` against an otherwise fixed profile.

    Substitutes the agent's own entries with each candidate report in turn
    and returns (index of the best one, its scaled utility); the first
    index attaining the maximum wins. The base arrays are restored before
    returning.
    """
    keep = (out[agent], welf[agent], expq[agent])
    best_j = -1
    best_u = 0
    try:
        for j in range(len(dev_welf)):
            out[agent] = dev_out[j]
            nm = nilm | (1 << agent) if dev_nil[j] else nilm & ~(1 << agent)
            welf[agent] = dev_welf[j]
            expq[agent] = dev_expq[j]
            u = agent_utility(n, root, out, nm, welf, expq, true_expq, true_cost, agent, mech)
            if best_j < 0 or u > best_u:
                best_j, best_u = j, u
    finally:
        out[agent], welf[agent], expq[agent] = keep
    return best_j, best_u
