"""Command line entry point.

Exit codes: 0 all checks pass, 1 an invariant failed, 2 scenario error,
3 the CP-VRL agent had no CP action.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .agents import cp_actions
from .beliefs import check_consistency, default_tol
from .consistency import NotADistribution, RankDeficient, extract
from .core import DomainError
from .reporting import dumps, num
from .runner import EXIT_ASSERTION, EXIT_OK, EXIT_SCENARIO, run
from .scenarios import ScenarioError, ToyConfig, build_example3, build_example4, build_toy_model, load_scenario

log = logging.getLogger("vrlsim")


def _summary(report) -> str:
    lines = [f"scenario {report.scenario} ({'exact' if report.exact else 'float'})"]
    if report.extraction is not None:
        anchors = ", ".join(s.key for s in report.extraction.problem.anchor_states)
        lines.append(f"  extraction: anchors [{anchors}] rank {report.extraction.rank}")
    lines.append(f"  cp actions: {len(report.cp)}")
    for table in report.tables:
        flag = " (deluded)" if report.deluded_choice[table.agent] else ""
        lines.append(f"  {table.agent}: {table.chosen}{flag} value {num(table.values[table.chosen])}")
    for err in report.errors:
        lines.append(f"  {err['agent']}: {err['error']}")
    for inv in report.invariants:
        lines.append(f"  [{'PASS' if inv.passed else 'FAIL'}] {inv.name}: {num(inv.measured)} <= {num(inv.bound)}")
    return "\n".join(lines)


def _emit(report, args) -> int:
    if args.json_only:
        sys.stdout.write(dumps(report.to_dict()))
    else:
        print(_summary(report))
    return report.exit_code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="directory for the JSON report and CSV tables")
    common.add_argument("--exact", action="store_true", help="exact rational arithmetic")
    common.add_argument("--json-only", action="store_true", help="print the JSON report, write no CSV")

    parser = argparse.ArgumentParser(prog="vrlsim", description="Value reinforcement learning agent simulator.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run a scenario file")
    p.add_argument("scenario")
    sub.add_parser("example3", parents=[common], help="U-VRL wireheading example")
    sub.add_parser("example4", parents=[common], help="CP-VRL example")
    p = sub.add_parser("toy", parents=[common], help="20-state toy experiment")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--anchors", type=int, default=2)
    p = sub.add_parser("extract", parents=[common], help="extract C(u) from a scenario's B(r|s)")
    p.add_argument("scenario")
    p.add_argument("--anchors", type=int, default=None)
    p = sub.add_parser("check-cp", parents=[common], help="consistency report and CP action set")
    p.add_argument("scenario")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    exact = True if args.exact else None
    try:
        if args.command == "example3":
            scenario = build_example3(exact=bool(args.exact))
        elif args.command == "example4":
            scenario = build_example4(exact=bool(args.exact))
        elif args.command == "toy":
            scenario = build_toy_model(ToyConfig(exact=bool(args.exact), seed=args.seed, tol=args.tol, anchors=args.anchors))
        else:
            scenario = load_scenario(args.scenario, exact=exact)

        if args.command == "extract":
            ext = extract(scenario.env, scenario.B, k=args.anchors)
            sys.stdout.write(dumps(ext.to_dict()))
            return EXIT_OK
        if args.command == "check-cp":
            cb = scenario.cb or extract(scenario.env, scenario.B).belief
            tol = scenario.tol if scenario.tol is not None else default_tol(scenario.exact)
            consistency = check_consistency(scenario.env, scenario.B, cb, tol)
            doc = {"consistency": consistency.to_dict(), "cp_actions": cp_actions(scenario.env, scenario.B, cb, tol)}
            sys.stdout.write(dumps(doc))
            return EXIT_OK if consistency.passed else EXIT_ASSERTION

        report = run(scenario, args.out, json_only=args.json_only)
    except (ScenarioError, DomainError, RankDeficient, NotADistribution, OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_SCENARIO
    return _emit(report, args)


if __name__ == "__main__":
    sys.exit(main())
