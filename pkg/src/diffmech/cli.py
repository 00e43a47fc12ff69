"""Command-line interface: run, audit, demo, gen.

Exit codes: 0 success, 2 usage or precondition problem, 3 a checked
property is violated (or a Monte Carlo comparison fails), 1 internal error
or demo regression. Reports render as text on stdout and, with
--json-out PATH, as a machine-readable document carrying exactly the same
values (rationals as exact strings).
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Optional, Sequence

from . import audit as audit_mod
from . import sim as sim_mod
from ._kernel import backend_name
from .mechanisms import (
    MECHANISM_NAMES,
    MechanismError,
    MechanismOutcome,
    expected_utilities,
    payoff_schedule,
    pev_allocate,
    qaidm_allocate,
    uniform_quality,
)
from .network import ReportProfile, Scenario, ScenarioError
from .poq import RationalParseError, format_rational, parse_rational, sample
from .scenario_io import (
    ScenarioFileError,
    bundled_names,
    dump_scenario,
    generate_scenario,
    load_bundled,
    load_scenario,
)


class DemoMismatch(AssertionError):
    """A demo's published numbers stopped reproducing."""


# --- run reports -----------------------------------------------------------


@dataclass(frozen=True)
class RunReport:
    """One mechanism run, renderable as text and as JSON, losslessly."""

    mechanism: str
    scenario: str
    mode: str  # "expected" | "quality" | "sample"
    realized_quality: Optional[Fraction]
    selected: Optional[int]
    champion: Optional[int]
    sequence: tuple[str, ...]
    w_values: Mapping[int, Fraction]
    payments: Mapping[int, Fraction]
    utilities: Mapping[int, Fraction]
    requester_utility: Fraction

    def to_dict(self) -> dict[str, Any]:
        return {
            "mechanism": self.mechanism,
            "scenario": self.scenario,
            "mode": self.mode,
            "realized_quality": None
            if self.realized_quality is None
            else format_rational(self.realized_quality),
            "selected": self.selected,
            "champion": self.champion,
            "sequence": list(self.sequence),
            "w_values": {str(i): format_rational(w) for i, w in sorted(self.w_values.items())},
            "payments": {str(i): format_rational(p) for i, p in sorted(self.payments.items())},
            "utilities": {str(i): format_rational(u) for i, u in sorted(self.utilities.items())},
            "requester_utility": format_rational(self.requester_utility),
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "RunReport":
        return cls(
            mechanism=doc["mechanism"],
            scenario=doc["scenario"],
            mode=doc["mode"],
            realized_quality=None
            if doc["realized_quality"] is None
            else parse_rational(doc["realized_quality"]),
            selected=doc["selected"],
            champion=doc["champion"],
            sequence=tuple(doc["sequence"]),
            w_values={int(k): parse_rational(v) for k, v in doc["w_values"].items()},
            payments={int(k): parse_rational(v) for k, v in doc["payments"].items()},
            utilities={int(k): parse_rational(v) for k, v in doc["utilities"].items()},
            requester_utility=parse_rational(doc["requester_utility"]),
        )

    def render_text(self) -> str:
        lines = [f"{self.mechanism} on {self.scenario} [{self.mode}]"]
        if self.realized_quality is not None:
            lines.append(f"  realized quality: {format_rational(self.realized_quality)}")
        lines.append(f"  selected: {self.selected if self.selected is not None else 'null'}")
        if self.sequence:
            lines.append(f"  critical sequence: ({', '.join(self.sequence)})")
        if self.w_values:
            lines.append(
                "  w values: "
                + ", ".join(
                    f"w_{i} = {format_rational(w)}" for i, w in sorted(self.w_values.items())
                )
            )
        nonzero = {i: p for i, p in sorted(self.payments.items()) if p != 0}
        label = "expected payments" if self.mode == "expected" else "payments"
        lines.append(
            f"  {label}: "
            + (
                ", ".join(f"p_{i} = {format_rational(p)}" for i, p in nonzero.items())
                or "none"
            )
        )
        nz_util = {i: u for i, u in sorted(self.utilities.items()) if u != 0}
        ulabel = "expected utilities" if self.mode == "expected" else "utilities"
        lines.append(
            f"  {ulabel}: "
            + (
                ", ".join(f"u_{i} = {format_rational(u)}" for i, u in nz_util.items())
                or "all zero"
            )
        )
        lines.append(f"  requester utility: {format_rational(self.requester_utility)}")
        return "\n".join(lines)


def _outcome_fields(
    outcome: Optional[MechanismOutcome],
) -> tuple[Optional[int], tuple[str, ...], Mapping[int, Fraction]]:
    if outcome is None or outcome.is_null:
        champion = None if outcome is None else outcome.champion
        return champion, (), {}
    assert outcome.sequence is not None
    return (
        outcome.champion,
        tuple(str(v) for v in outcome.sequence.order),
        dict(outcome.welfare_without),
    )


def build_run_report(
    scenario: Scenario,
    reports: ReportProfile,
    mechanism: str,
    *,
    mode: str,
    quality: Optional[Fraction] = None,
    seed: int = 0,
    scenario_name: str = "scenario",
) -> RunReport:
    """Execute one mechanism run in the requested mode."""
    outcome: Optional[MechanismOutcome] = None
    if mechanism in ("pev", "idm"):
        outcome = pev_allocate(scenario, reports, mechanism=mechanism)
    elif mechanism == "qaidm":
        outcome = qaidm_allocate(scenario, reports)
    selected, payoffs_at = payoff_schedule(scenario, reports, mechanism)
    champion, sequence, w_values = _outcome_fields(outcome)

    if mechanism in ("idm", "vcg"):
        q0 = uniform_quality(scenario)
        if quality is not None and quality != q0:
            raise MechanismError(
                f"this degenerate scenario always realizes quality {format_rational(q0)}"
            )
        quality = q0
        mode = "quality"
    if mode == "sample":
        if selected is None:
            quality = None
        else:
            quality = sample(scenario.agents[selected].pmf, random.Random(seed))

    ids = scenario.worker_ids
    if mode == "expected":
        if outcome is not None:
            utilities, requester = expected_utilities(scenario, reports, outcome)
        else:
            utilities, requester = {i: Fraction(0) for i in ids}, Fraction(0)
        payments = {i: Fraction(0) for i in ids}
        if selected is not None:
            for q, prob in scenario.agents[selected].pmf.points:
                vec = payoffs_at(q)
                for i in ids:
                    payments[i] += prob * vec.payments[i]
        return RunReport(
            mechanism, scenario_name, "expected", None, selected, champion,
            sequence, w_values, payments, utilities, requester,
        )

    if selected is None or quality is None:
        zeros = {i: Fraction(0) for i in ids}
        return RunReport(
            mechanism, scenario_name, mode, quality, None, champion,
            sequence, w_values, dict(zeros), dict(zeros), Fraction(0),
        )
    vector = payoffs_at(quality)
    cost = scenario.agents[selected].cost
    utilities = {
        i: vector.payments[i] - (cost if i == selected else Fraction(0)) for i in ids
    }
    return RunReport(
        mechanism, scenario_name, mode, quality, selected, champion,
        sequence, w_values, dict(vector.payments), utilities, vector.requester_utility,
    )


# --- scenario argument -----------------------------------------------------


def _load_scenario_arg(arg: str) -> tuple[Scenario, dict, str]:
    if os.path.exists(arg):
        scenario, reports = load_scenario(arg)
        return scenario, reports, os.path.basename(arg)
    name = arg[:-5] if arg.endswith(".json") else arg
    if name in bundled_names():
        scenario, reports = load_bundled(name)
        return scenario, reports, name
    raise ScenarioFileError(
        f"no such file or bundled scenario: {arg!r} "
        f"(bundled: {', '.join(bundled_names())})"
    )


def _write_json(path: Optional[str], doc: Any) -> None:
    if path is None:
        return
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# --- subcommands ------------------------------------------------------------


def _cmd_run(args: argparse.Namespace) -> int:
    scenario, reports, name = _load_scenario_arg(args.scenario)

    if args.trials:
        stats = sim_mod.run_trials(scenario, reports, args.mechanism, args.trials, args.seed)
        m, v, rm, rv = sim_mod.analytic_moments(scenario, reports, args.mechanism)
        comparison = sim_mod.compare(stats, m, v, rm, rv)
        print(
            f"{args.mechanism} on {name}: {stats.trials} trials, seed {stats.seed}, "
            f"selected {stats.selected if stats.selected is not None else 'null'}"
        )
        print(comparison.render_text())
        _write_json(
            args.json_out,
            {
                "mechanism": args.mechanism,
                "scenario": name,
                "trials": stats.trials,
                "seed": stats.seed,
                "selected": stats.selected,
                "empirical_mean": {
                    str(i): format_rational(u) for i, u in sorted(stats.agent_mean.items())
                },
                "requester_mean": format_rational(stats.requester_mean),
                "requester_variance": format_rational(stats.requester_variance),
                "passed": comparison.passed,
            },
        )
        return 0 if comparison.passed else 3

    if args.quality is not None:
        mode, quality = "quality", parse_rational(args.quality)
    elif args.sample:
        mode, quality = "sample", None
    else:
        mode, quality = "expected", None
    report = build_run_report(
        scenario, reports, args.mechanism,
        mode=mode, quality=quality, seed=args.seed, scenario_name=name,
    )
    print(report.render_text())
    _write_json(args.json_out, report.to_dict())
    return 0


_AUDIT_PROPS = ("ir", "ic", "wbb", "lemmas", "gap")


def _cmd_audit(args: argparse.Namespace) -> int:
    scenario, reports, name = _load_scenario_arg(args.scenario)
    chosen = [p for p in _AUDIT_PROPS if getattr(args, p)]
    if args.all or not chosen:
        chosen = list(_AUDIT_PROPS)
    if args.mechanism in ("qaidm", "vcg") and "lemmas" in chosen:
        if getattr(args, "lemmas"):
            raise MechanismError("the lemma checks audit the pev/idm payoff rule")
        chosen.remove("lemmas")
    grid = audit_mod.grid_for(args.mechanism, step=parse_rational(args.grid_step))
    results = audit_mod.run_audits(
        scenario, args.mechanism, chosen, grid=grid, seed=args.seed
    )
    print(f"auditing {args.mechanism} on {name} (kernel backend: {backend_name()})")
    for r in results:
        print(r.render_text())
    _write_json(
        args.json_out,
        {"scenario": name, "mechanism": args.mechanism, "results": [r.to_dict() for r in results]},
    )
    return 0 if all(r.ok for r in results) else 3


def _require(cond: bool, what: str) -> None:
    if not cond:
        raise DemoMismatch(what)


def _demo_example2(json_out: Optional[str]) -> int:
    scenario, reports = load_bundled("example2")
    report = build_run_report(
        scenario, reports, "pev", mode="quality", quality=Fraction(8),
        scenario_name="example2",
    )
    F = Fraction
    _require(report.w_values[2] == 4 and report.w_values[6] == 4, "w_2 = w_6 = 4")
    _require(report.w_values[9] == F(9, 2), "w_9 = 4.5")
    _require(report.selected == 9, "agent 9 selected")
    _require(report.payments[2] == 0, "p_2 = 0")
    _require(report.payments[6] == F(1, 2), "p_6 = 0.5")
    _require(report.payments[9] == F(7, 2), "p_9 = 3.5")
    _require(report.utilities[2] == 0, "u_2 = 0")
    _require(report.utilities[6] == F(1, 2), "u_6 = 0.5")
    _require(report.utilities[9] == F(5, 2), "u_9 = 2.5")
    _require(report.requester_utility == 4, "u_s = 4")
    print(report.render_text())
    expected = build_run_report(
        scenario, reports, "pev", mode="expected", scenario_name="example2"
    )
    _require(expected.utilities[9] == F(29, 10), "expected u_9 = 2.9")
    _require(expected.requester_utility == 4, "expected u_s = 4")
    print(expected.render_text())
    print("all published values reproduced")
    _write_json(json_out, [report.to_dict(), expected.to_dict()])
    return 0


def _demo_example1(json_out: Optional[str]) -> int:
    scenario, reports = load_bundled("figure1")
    F = Fraction
    vcg = build_run_report(scenario, reports, "vcg", mode="quality", scenario_name="figure1")
    _require(vcg.payments[1] == F(1, 2), "p_1 = 0.5")
    _require(vcg.payments[4] == F(3, 5), "p_4 = 0.6")
    _require(vcg.requester_utility == F(-1, 10), "u_s = -0.1")
    print(vcg.render_text())
    idm = build_run_report(scenario, reports, "idm", mode="quality", scenario_name="figure1")
    _require(idm.requester_utility >= 0, "idm keeps the requester whole")
    print(idm.render_text())
    print("network VCG pays out more than the task is worth; idm does not")
    _write_json(json_out, [vcg.to_dict(), idm.to_dict()])
    return 0


def _demo_prop1(json_out: Optional[str]) -> int:
    scenario, reports = load_bundled("figure5")
    report = build_run_report(
        scenario, reports, "pev", mode="quality", quality=Fraction(1),
        scenario_name="figure5",
    )
    _require(report.selected == 1, "pev selects agent 1, not the efficient agent 2")
    _require(report.requester_utility == 0, "requester utility 0")
    gap = audit_mod.check_efficiency_gap(scenario, "pev")
    _require(not gap.ok, "efficiency is violated here")
    _require("gap = 0.3" in gap.details[0], "gap = 3/10")
    print(report.render_text())
    print(gap.render_text())
    print("trading efficiency (gap 0.3) for IR + IC + WBB")
    _write_json(json_out, [report.to_dict(), gap.to_dict()])
    return 0


def _demo_idm_vs_pev(json_out: Optional[str]) -> int:
    scenario, reports = load_bundled("figure1")
    idm = build_run_report(scenario, reports, "idm", mode="quality", scenario_name="figure1")
    pev = build_run_report(
        scenario, reports, "pev", mode="quality", quality=Fraction(1),
        scenario_name="figure1",
    )
    _require(idm.selected == pev.selected, "same selection")
    _require(dict(idm.payments) == dict(pev.payments), "same payments")
    _require(idm.requester_utility == pev.requester_utility, "same requester utility")
    print(idm.render_text())
    print(pev.render_text())
    print("on a degenerate scenario the two mechanisms coincide")
    _write_json(json_out, [idm.to_dict(), pev.to_dict()])
    return 0


_DEMOS = {
    "example1": _demo_example1,
    "example2": _demo_example2,
    "prop1": _demo_prop1,
    "idm-vs-pev": _demo_idm_vs_pev,
}


def _cmd_demo(args: argparse.Namespace) -> int:
    return _DEMOS[args.name](args.json_out)


def _cmd_gen(args: argparse.Namespace) -> int:
    scenario = generate_scenario(
        args.n_agents,
        n_levels=args.levels,
        density=args.density,
        seed=args.seed,
        degenerate=args.degenerate,
    )
    text = dump_scenario(scenario)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# --- parser ------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffmech",
        description=(
            "Run and audit truthful diffusion mechanisms for single-task "
            "allocation on social networks."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one mechanism on a scenario")
    run.add_argument("scenario", help="scenario file path or bundled name")
    run.add_argument("mechanism", choices=MECHANISM_NAMES)
    mode = run.add_mutually_exclusive_group()
    mode.add_argument("--quality", help="realized quality, exact rational")
    mode.add_argument(
        "--expected", action="store_true", help="analytic expectations (default)"
    )
    mode.add_argument(
        "--sample", action="store_true", help="draw the realized quality with --seed"
    )
    run.add_argument("--seed", type=int, default=0)
    run.add_argument(
        "--trials", type=int, default=0,
        help="Monte Carlo mode: this many seeded draws, compared to analytic values",
    )
    run.add_argument("--json-out", metavar="PATH")

    aud = sub.add_parser("audit", help="check properties, with witnesses on failure")
    aud.add_argument("scenario")
    aud.add_argument("mechanism", choices=MECHANISM_NAMES)
    aud.add_argument("--all", action="store_true", help="all applicable properties (default)")
    aud.add_argument("--ir", action="store_true", help="individual rationality")
    aud.add_argument("--ic", action="store_true", help="incentive compatibility on the grid")
    aud.add_argument("--wbb", action="store_true", help="weak budget balance")
    aud.add_argument("--lemmas", action="store_true", help="payoff lemmas (pev/idm)")
    aud.add_argument("--gap", action="store_true", help="efficiency gap")
    aud.add_argument("--seed", type=int, default=0)
    aud.add_argument("--grid-step", default="1/10", help="pmf/cost deviation step")
    aud.add_argument("--json-out", metavar="PATH")

    demo = sub.add_parser("demo", help="reproduce a published worked example")
    demo.add_argument("name", choices=sorted(_DEMOS))
    demo.add_argument("--json-out", metavar="PATH")

    gen = sub.add_parser("gen", help="generate a random scenario file")
    gen.add_argument("n_agents", type=int)
    gen.add_argument("--levels", type=int, default=3, help="number of quality levels")
    gen.add_argument("--density", type=float, default=0.3, help="extra-edge probability")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument(
        "--degenerate", action="store_true", help="uniform-quality setting (idm/vcg)"
    )
    gen.add_argument("-o", "--out", metavar="PATH", help="output path (default stdout)")
    return parser


_COMMANDS = {
    "run": _cmd_run,
    "audit": _cmd_audit,
    "demo": _cmd_demo,
    "gen": _cmd_gen,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DemoMismatch as exc:
        print(f"demo regression: {exc}", file=sys.stderr)
        return 1
    except (
        ScenarioFileError,
        ScenarioError,
        MechanismError,
        RationalParseError,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
