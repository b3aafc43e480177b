"""Acceptance suite.  Each criterion prints one PASS/FAIL line per check.

Run with ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
"""

import random
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

from vrlsim.agents import choose, cp_actions, eep_deviation, v_reduced, v_rl, v_utility, v_vrl
from vrlsim.beliefs import BeliefModel, UtilityBelief, posterior
from vrlsim.consistency import (
    RankDeficient,
    build_reward_model,
    check_eps_isb_bound,
    extract,
    find_anchor_states,
    reward_maximising_utility,
)
from vrlsim.core import Delusion, Environment, RewardGrid, UtilityFunction, product_states
from vrlsim.runner import evaluate, run
from vrlsim.scenarios import (
    ToyConfig,
    build_example3,
    build_example4,
    build_toy_model,
    load_scenario,
    random_instance,
)

ROOT = Path(__file__).resolve().parent.parent
BUNDLED = sorted((ROOT / "scenarios").glob("*.json"))


def report(criterion, label, passed, detail=""):
    line = f"[{'PASS' if passed else 'FAIL'}] {criterion} {label}"
    print(f"{line}: {detail}" if detail else line)
    return passed


def close(x, y, tol):
    return x == y if tol == 0 else abs(x - y) <= tol


# -- 1 --------------------------------------------------------------------------


def criterion_1():
    ok = True
    for exact, tol in ((True, 0), (False, 1e-12)):
        start = time.perf_counter()
        sc = build_example3(exact=exact)
        chosen = choose("u_vrl", sc.env, sc.B, sc.cb)
        elapsed = time.perf_counter() - start
        u2 = sc.env.utility("u2")
        post = posterior(sc.env.state("s2/id"), 1, sc.cb)[u2]
        a1_zero = all(close(v_vrl(f"a1.{d.name}", sc.B, sc.cb), 0, tol) for d in sc.env.delusions)
        passed = (
            chosen.chosen == "a2.c1"
            and close(chosen.values["a2.c1"], 1, tol)
            and a1_zero
            and close(post, 1, tol)
            and elapsed < 1.0
        )
        mode = "exact" if exact else "float"
        detail = f"chosen {chosen.chosen} V={chosen.values[chosen.chosen]} C(u2|s2,1)={post} {elapsed:.3f}s"
        ok &= report("1", f"chess U-VRL wireheading ({mode})", passed, detail)
    return ok


# -- 2 --------------------------------------------------------------------------


def criterion_2():
    ok = True
    for exact, tol in ((True, 0), (False, 1e-12)):
        mode = "exact" if exact else "float"
        sc = build_example4(exact=exact)
        cp = cp_actions(sc.env, sc.B, sc.cb, tol)
        wanted = [f"a{i}.{d}" for i in (1, 2) for d in ("id", "c0", "swap")]
        missing = [a for a in wanted if a not in cp]
        ok &= report("2a", f"chess CP containment ({mode})", not missing, f"missing {missing}" if missing else "")

        v1 = {v_reduced(f"a1.{d.name}", sc.B, sc.cb) for d in sc.env.delusions}
        v2 = {v_reduced(f"a2.{d.name}", sc.B, sc.cb) for d in sc.env.delusions}
        passed = all(close(v, 0, tol) for v in v1) and all(close(v, Fraction(-1, 3), tol) for v in v2)
        ok &= report("2b", f"chess reduced values ({mode})", passed, f"{[str(v) for v in sorted(v1)]} {[str(v) for v in sorted(v2)]}")

        table = choose("cp_vrl", sc.env, sc.B, sc.cb, tol)
        inners = {s.inner for s, _ in sc.B.successors(table.chosen)}
        ok &= report("2c", f"chess CP-VRL choice ({mode})", inners == {"s1"}, f"chosen {table.chosen}")
    return ok


# -- 3 --------------------------------------------------------------------------


def criterion_3():
    start = time.perf_counter()
    sc = build_toy_model(ToyConfig())
    result = evaluate(sc)
    ext = extract(sc.env, sc.B, k=2)
    elapsed = time.perf_counter() - start

    rl = next(t for t in result.tables if t.agent == "rl")
    ok = report(
        "3",
        "toy RL picks a deluded state",
        rl.chosen.endswith("/del") and abs(rl.values[rl.chosen] - 3) <= 1e-12,
        f"{rl.chosen} V={rl.values[rl.chosen]}",
    )
    nondelusional = [s.key for s in sc.env.nondelusional_states]
    ok &= report("3", "toy CP set is only id states", result.cp == nondelusional, f"{result.cp}")
    err = max(abs(ext.belief[u] - sc.generating_prior[u]) for u in sc.env.utilities)
    ok &= report(
        "3",
        "toy extraction from 2 greedy anchors",
        len(ext.problem.anchor_states) == 2 and err <= 1e-6,
        f"anchors {[s.key for s in ext.problem.anchor_states]} max err {err:.2e}",
    )
    ok &= report("3", "toy runtime", elapsed < 5.0, f"{elapsed:.3f}s")
    return ok


# -- 4 --------------------------------------------------------------------------


def criterion_4(n=500):
    rng = random.Random(4004)
    worst = 0.0
    for _ in range(n):
        sc = random_instance(rng, reward_model="full_support")
        for a in sc.env.actions:
            worst = max(worst, abs(v_vrl(a, sc.B, sc.cb) - v_rl(a, sc.B)))
    return report("4", f"U-VRL equals RL on {n} full-support instances", worst <= 1e-9, f"max gap {worst:.2e}")


# -- 5 --------------------------------------------------------------------------


def criterion_5(n=500, tol=1e-9):
    rng = random.Random(5005)
    eep_slack = float("inf")
    reduce_gap = 0.0
    n_cp = 0
    for k in range(n):
        sc = random_instance(rng, reward_model="sensor" if k % 2 == 0 else "full_support")
        bound = len(sc.env.rewards) * tol
        for a in cp_actions(sc.env, sc.B, sc.cb, tol):
            n_cp += 1
            eep_slack = min(eep_slack, bound - eep_deviation(a, sc.B, sc.cb))
            reduce_gap = max(reduce_gap, abs(v_vrl(a, sc.B, sc.cb) - v_reduced(a, sc.B, sc.cb)))
    ok = report("5", f"CP implies EEP on {n} instances", n_cp > 0 and eep_slack >= 0, f"{n_cp} CP actions, min slack {eep_slack:.2e}")
    ok &= report("5", "CP values equal reduced values", reduce_gap <= 1e-9, f"max gap {reduce_gap:.2e}")
    return ok


# -- 6 --------------------------------------------------------------------------


def with_duplicate_utility(sc):
    """Copy of ``sc`` where the first utility appears twice, so no anchor set has full rank."""
    u0 = sc.env.utilities[0]
    dup = UtilityFunction(f"{u0.name}_dup", dict(u0.table))
    utilities = list(sc.env.utilities) + [dup]
    prior = dict(sc.cb.prior)
    prior[u0] = prior[u0] / 2
    prior[dup] = prior[u0]
    env = Environment(sc.env.states, sc.env.actions, sc.env.rewards, utilities)
    cb = UtilityBelief(prior)
    return env, BeliefModel(sc.B.transition, build_reward_model(cb, None, env))


def criterion_6(n=200):
    rng = random.Random(6006)
    recovered = tried = 0
    while tried < n:
        sc = random_instance(rng, exact=True)
        try:
            anchors = find_anchor_states(sc.env, sc.B)
        except RankDeficient:
            continue
        tried += 1
        recovered += dict(extract(sc.env, sc.B, anchors=anchors).belief.prior) == dict(sc.cb.prior)
    ok = report("6", f"exact round trip on {n} full-rank instances", recovered == n, f"{recovered}/{n} recovered")

    raised = 0
    for _ in range(50):
        env, B = with_duplicate_utility(random_instance(rng, exact=True))
        try:
            extract(env, B)
        except RankDeficient:
            raised += 1
    ok &= report("6", "rank-deficient instances raise", raised == 50, f"{raised}/50 raised")
    return ok


# -- 7 --------------------------------------------------------------------------


def permuted_transitions(sc, rng):
    by_pair = {(s.inner, s.delusion.name): s for s in sc.env.states}
    names = [d.name for d in sc.env.delusions]
    shuffled = names[:]
    rng.shuffle(shuffled)
    remap = dict(zip(names, shuffled))
    return BeliefModel(
        {a: {by_pair[(s.inner, remap[s.delusion.name])]: p for s, p in row.items()} for a, row in sc.B.transition.items()},
        sc.B.reward_pred,
    )


def perturbed(u, grid, rng):
    """Move each value at most one grid step; the result is generally not isb."""
    top = len(grid) - 1
    table = {s: grid.values[min(top, max(0, grid.index(v) + rng.choice((-1, 0, 1))))] for s, v in u.table.items()}
    return UtilityFunction(f"{u.name}~", table)


def u_rl_chooses_d1():
    grid = RewardGrid((-1, 0, 1))
    delusions = [Delusion.identity(grid), Delusion.constant(grid, 1, "d1")]
    states = product_states(["s1", "s2"], delusions)
    base = UtilityFunction.inner_based("u'", states, {"s1": 0, "s2": -1}, grid)
    env = Environment(states, [s.key for s in states], grid, [base])
    B = BeliefModel({s.key: {s: 1} for s in states}, build_reward_model(UtilityBelief({base: 1}), None, env))
    table = choose("utility", env, B, utility=reward_maximising_utility(base, env))
    return table


def criterion_7(n=200):
    rng = random.Random(7007)
    mismatches = 0
    for _ in range(n):
        sc = random_instance(rng, exact=True, isb=True)
        B2 = permuted_transitions(sc, rng)
        for a in sc.env.actions:
            mismatches += sum(v_utility(a, u, sc.B) != v_utility(a, u, B2) for u in sc.env.utilities)
    ok = report("7", f"isb values invariant under delusion permutation ({n} instances)", mismatches == 0, f"{mismatches} mismatches")

    slack = None
    nonzero_eps = 0
    for _ in range(n):
        sc = random_instance(rng, exact=True, isb=True)
        u = perturbed(rng.choice(sc.env.utilities), sc.env.rewards, rng)
        rep = check_eps_isb_bound(u, sc.env, sc.B)
        nonzero_eps += rep.eps > 0
        slack = rep.slack if slack is None else min(slack, rep.slack)
    ok &= report("7", f"eps-isb bound on {n} perturbed utilities", slack >= 0, f"min slack {slack}, {nonzero_eps} with eps > 0")

    table = u_rl_chooses_d1()
    ok &= report("7", "reward-maximising utility agent", table.chosen.endswith("/d1"), f"chosen {table.chosen}")
    return ok


# -- 8 --------------------------------------------------------------------------


def run_twice_identical(scenario_factory):
    with tempfile.TemporaryDirectory() as tmp:
        outputs = []
        for k in (1, 2):
            out = Path(tmp) / str(k)
            run(scenario_factory(), out)
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        return outputs[0] == outputs[1] and bool(outputs[0])


def criterion_8():
    factories = {p.name: (lambda p=p: load_scenario(p)) for p in BUNDLED}
    factories["example3"] = build_example3
    factories["example4"] = build_example4
    factories["toy"] = lambda: build_toy_model(ToyConfig(seed=11))
    factories["toy (exact)"] = lambda: build_toy_model(ToyConfig(seed=11, exact=True))
    differing = [name for name, make in factories.items() if not run_twice_identical(make)]
    return report("8", f"byte-identical reports for {len(factories)} scenarios", not differing, f"differing {differing}" if differing else "")


# -- pytest entry points -------------------------------------------------------------


def test_criterion_1_example3():
    assert criterion_1()


def test_criterion_2_example4():
    assert criterion_2()


def test_criterion_3_toy_model():
    assert criterion_3()


def test_criterion_4_u_vrl_is_rl():
    assert criterion_4()


def test_criterion_5_cp_eep_no_wireheading():
    assert criterion_5()


def test_criterion_6_round_trip():
    assert criterion_6()


def test_criterion_7_isb():
    assert criterion_7()


def test_criterion_8_determinism():
    assert criterion_8()


if __name__ == "__main__":
    checks = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]
    results = [check() for check in checks]
    sys.exit(0 if all(results) else 1)
