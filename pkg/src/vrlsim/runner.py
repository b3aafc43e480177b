"""Execute a scenario: extraction, consistency, CP filter, agents, invariant suites."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .agents import (
    CP_VRL,
    UTILITY,
    NoCPAction,
    choose,
    cp_actions,
    eep_deviation,
    v_reduced,
    v_rl,
    v_vrl,
)
from .beliefs import BeliefModel, UtilityBelief, c_marginal, check_consistency, default_tol
from .consistency import extract
from .core import Environment
from .reporting import csv_text, dumps, num
from .scenarios import Scenario, random_instance

REPORT_VERSION = 1
EXIT_OK, EXIT_ASSERTION, EXIT_SCENARIO, EXIT_NO_CP = 0, 1, 2, 3


@dataclass
class InvariantResult:
    name: str
    measured: object
    bound: object
    checked: int

    @property
    def passed(self) -> bool:
        return self.measured <= self.bound

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "measured": num(self.measured),
            "bound": num(self.bound),
            "checked": self.checked,
        }


@dataclass
class RunReport:
    scenario: str
    exact: bool
    tol: object
    cb: UtilityBelief | None = None
    consistency: object = None
    extraction: object = None
    extraction_error: float | None = None
    cp: list = field(default_factory=list)
    tables: list = field(default_factory=list)
    deluded_choice: dict = field(default_factory=dict)
    invariants: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    exit_code: int = EXIT_OK

    def to_dict(self) -> dict:
        doc = {
            "report_version": REPORT_VERSION,
            "scenario": self.scenario,
            "mode": "exact" if self.exact else "float",
            "tol": num(self.tol),
            "exit_code": self.exit_code,
            "errors": self.errors,
            "extraction": None,
            "prior": None if self.cb is None else {u.name: num(p) for u, p in self.cb.items()},
            "consistency": None if self.consistency is None else self.consistency.to_dict(),
            "cp_actions": self.cp,
            "agents": [],
            "invariants": [inv.to_dict() for inv in self.invariants],
        }
        if self.extraction is not None:
            doc["extraction"] = self.extraction.to_dict()
            if self.extraction_error is not None:
                doc["extraction"]["max_abs_error_vs_generating"] = num(self.extraction_error)
        for table in self.tables:
            entry = table.to_dict()
            entry["chosen_deluded"] = self.deluded_choice[table.agent]
            doc["agents"].append(entry)
        return doc


def _support_ok(s, B: BeliefModel, cb: UtilityBelief) -> bool:
    marginal = c_marginal(s, cb)
    return all(marginal.get(r, 0) > 0 for r, _ in B.rewards(s))


def scenario_invariants(env: Environment, B: BeliefModel, cb: UtilityBelief, tol, exact: bool, cp=None) -> list:
    """Per-scenario checks of the U-VRL/RL, CP/EEP and no-wireheading identities."""
    bound = default_tol(exact)
    if cp is None:
        cp = cp_actions(env, B, cb, tol)
    full = [a for a in env.actions if all(_support_ok(s, B, cb) for s, _ in B.successors(a))]
    return [
        InvariantResult("u_vrl_equals_rl", max((abs(v_vrl(a, B, cb) - v_rl(a, B)) for a in full), default=0), bound, len(full)),
        InvariantResult("cp_implies_eep", max((eep_deviation(a, B, cb) for a in cp), default=0), len(env.rewards) * tol, len(cp)),
        InvariantResult("cp_value_reduces", max((abs(v_vrl(a, B, cb) - v_reduced(a, B, cb)) for a in cp), default=0), bound, len(cp)),
    ]


def random_suite(seed: int, count: int, exact: bool = False) -> list:
    """Invariant checks over ``count`` random instances drawn from ``seed``."""
    rng = random.Random(seed)
    bound = default_tol(exact)
    vrl_gap, eep, reduce_ = 0, 0, 0
    n_cp = 0
    for _ in range(count):
        sc = random_instance(rng, exact=exact, reward_model="full_support")
        for a in sc.env.actions:
            vrl_gap = max(vrl_gap, abs(v_vrl(a, sc.B, sc.cb) - v_rl(a, sc.B)))
        sc = random_instance(rng, exact=exact, reward_model="sensor")
        for a in cp_actions(sc.env, sc.B, sc.cb, bound):
            n_cp += 1
            eep = max(eep, eep_deviation(a, sc.B, sc.cb))
            reduce_ = max(reduce_, abs(v_vrl(a, sc.B, sc.cb) - v_reduced(a, sc.B, sc.cb)))
    # eep bound: each of |R| <= 5 terms may be off by the cp tolerance
    return [
        InvariantResult("random_u_vrl_equals_rl", vrl_gap, bound, count),
        InvariantResult("random_cp_implies_eep", eep, 5 * bound, n_cp),
        InvariantResult("random_cp_value_reduces", reduce_, bound, n_cp),
    ]


def evaluate(scenario: Scenario) -> RunReport:
    """Run every stage of a scenario and collect the results (no I/O)."""
    env, B = scenario.env, scenario.B
    exact = scenario.exact
    tol = scenario.tol if scenario.tol is not None else default_tol(exact)
    report = RunReport(scenario.name, exact, tol)

    cb = scenario.cb
    if cb is None:
        directive = scenario.extraction
        anchors = None
        if directive.get("anchors"):
            anchors = [env.state(key) for key in directive["anchors"]]
        report.extraction = extract(env, B, k=directive.get("k"), anchors=anchors)
        cb = report.extraction.belief
        if scenario.generating_prior is not None:
            report.extraction_error = max(abs(cb[u] - scenario.generating_prior[u]) for u in env.utilities)
    report.cb = cb

    report.consistency = check_consistency(env, B, cb, tol)
    cp = cp_actions(env, B, cb, tol)
    report.cp = list(cp)

    cp_within = 0
    for kind in scenario.agents:
        utility = None
        if kind.startswith("utility:"):
            utility = env.utility(kind.split(":", 1)[1])
            kind = UTILITY
        try:
            table = choose(kind, env, B, cb, tol, utility=utility)
        except NoCPAction as exc:
            report.errors.append({"agent": kind, "error": "NoCPAction", "message": str(exc)})
            continue
        report.tables.append(table)
        report.deluded_choice[table.agent] = any(
            not s.delusion.is_identity for s, _ in B.successors(table.chosen)
        )
        if kind == CP_VRL and table.chosen not in cp:
            cp_within = 1

    report.invariants.append(
        InvariantResult("consistency", report.consistency.max_deviation, tol, len(report.consistency.deviations))
    )
    report.invariants.extend(scenario_invariants(env, B, cb, tol, exact, cp))
    report.invariants.append(InvariantResult("cp_vrl_choice_in_cp", cp_within, 0, 1))
    if scenario.extraction is not None and report.extraction_error is not None:
        report.invariants.append(
            InvariantResult("extraction_recovers_generating_prior", report.extraction_error, 0 if exact else 1e-6, len(env.utilities))
        )
    if scenario.random_suite:
        report.invariants.extend(random_suite(scenario.seed, scenario.random_suite, exact))

    if any(e["error"] == "NoCPAction" for e in report.errors):
        report.exit_code = EXIT_NO_CP
    elif not all(inv.passed for inv in report.invariants):
        report.exit_code = EXIT_ASSERTION
    return report


def value_table_csv(table, cp) -> str:
    rows = [
        [a, num(v), "1" if a in cp else "0", "1" if a == table.chosen else "0"]
        for a, v in table.values.items()
    ]
    return csv_text(["action", "value", "cp", "chosen"], rows)


def write_report(report: RunReport, scenario: Scenario, out_dir, json_only: bool = False) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / f"{scenario.name}.report.json"
    path.write_text(dumps(report.to_dict()))
    written.append(path)
    if json_only:
        return written
    for table in report.tables:
        safe = table.agent.replace("(", "_").replace(")", "")
        path = out / f"{scenario.name}.{safe}.csv"
        path.write_text(value_table_csv(table, set(report.cp)))
        written.append(path)
    if scenario.curves:
        path = out / f"{scenario.name}.utilities.csv"
        path.write_text(csv_text(["utility", "code", "raw", "quantized"], [[n, c, repr(float(x)), num(q)] for n, c, x, q in scenario.curves]))
        written.append(path)
    return written


def run(scenario: Scenario, output_path=None, json_only: bool = False) -> RunReport:
    """Evaluate ``scenario`` and, if ``output_path`` is given, write its report files there."""
    report = evaluate(scenario)
    if output_path is not None:
        write_report(report, scenario, output_path, json_only)
    return report
