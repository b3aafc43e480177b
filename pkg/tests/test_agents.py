import random
from fractions import Fraction

import pytest

from vrlsim.agents import (
    NoCPAction,
    argmax,
    choose,
    cp_actions,
    eep_deviation,
    is_eep,
    v_reduced,
    v_rl,
    v_utility,
    v_vrl,
)
from vrlsim.beliefs import BeliefModel, UtilityBelief
from vrlsim.consistency import build_reward_model, extract, reward_maximising_utility
from vrlsim.core import Delusion, Environment, RewardGrid, UtilityFunction, product_states
from vrlsim.scenarios import build_example3, build_example4, build_toy_model, random_instance


@pytest.fixture(scope="module")
def ex3():
    return build_example3(exact=True)


@pytest.fixture(scope="module")
def toy():
    sc = build_toy_model()
    return sc, extract(sc.env, sc.B).belief


def brute_v_rl(a, sc):
    total = 0
    for s in sc.env.states:
        for r in sc.env.rewards:
            total += sc.B.transition[a].get(s, 0) * sc.B.reward_pred[s].get(r, 0) * r
    return total


def brute_v_vrl(a, sc):
    """Triple sum with the posterior written out inline."""
    total = 0
    for s in sc.env.states:
        ps = sc.B.transition[a].get(s, 0)
        for r in sc.env.rewards:
            pr = sc.B.reward_pred[s].get(r, 0)
            evidence = sum(p for u, p in sc.cb.items() if u.table[s] == r)
            if evidence == 0:
                continue
            for u, p in sc.cb.items():
                if u.table[s] == r:
                    total += ps * pr * (p / evidence) * u.table[s]
    return total


def test_v_rl_toy_deluded_state_gets_three(toy):
    sc, _ = toy
    for inner in sc.env.inner_states:
        assert v_rl(f"{inner}/del", sc.B) == pytest.approx(3, abs=1e-12)


def test_v_rl_point_mass_zero():
    grid = RewardGrid((-1, 0, 1))
    states = product_states(["a"], [Delusion.identity(grid)])
    u = UtilityFunction("zero", {states[0]: 0})
    Environment(states, ["go"], grid, [u])
    B = BeliefModel({"go": {states[0]: 1}}, {states[0]: {0: 1}})
    assert v_rl("go", B) == 0
    assert v_utility("go", u, B) == 0


def test_v_rl_and_v_vrl_match_brute_force_random():
    rng = random.Random(11)
    for _ in range(150):
        sc = random_instance(rng, exact=True, reward_model=rng.choice(["sensor", "full_support"]))
        for a in sc.env.actions:
            assert v_rl(a, sc.B) == brute_v_rl(a, sc)
            assert v_vrl(a, sc.B, sc.cb) == brute_v_vrl(a, sc)


def test_v_utility_example3(ex3):
    u1 = ex3.env.utility("u1")
    for d in ex3.env.delusions:
        assert v_utility(f"a2.{d.name}", u1, ex3.B) == -1
        assert v_utility(f"a1.{d.name}", u1, ex3.B) == 0


def test_v_utility_zero_utility(ex3):
    zero = UtilityFunction("zero", {s: 0 for s in ex3.env.states})
    assert all(v_utility(a, zero, ex3.B) == 0 for a in ex3.env.actions)


def test_u_rl_utility_agent_picks_clamp_to_one():
    grid = RewardGrid((-1, 0, 1))
    delusions = [Delusion.identity(grid), Delusion.constant(grid, 1, "d1")]
    states = product_states(["s1", "s2"], delusions)
    inner = {"s1": 0, "s2": -1}
    base = UtilityFunction.inner_based("u'", states, inner, grid)
    env0 = Environment(states, [s.key for s in states], grid, [base])
    u_rl = reward_maximising_utility(base, env0)
    assert all(u_rl(s) == 1 for s in states if s.delusion.name == "d1")
    B = BeliefModel({s.key: {s: 1} for s in states}, build_reward_model(UtilityBelief({base: 1}), None, env0))
    table = choose("utility", env0, B, utility=u_rl)
    assert table.chosen == "s1/d1"
    assert table.values["s1/d1"] == 1


def test_v_vrl_example3(ex3):
    assert v_vrl("a2.c1", ex3.B, ex3.cb) == 1
    for d in ex3.env.delusions:
        assert v_vrl(f"a1.{d.name}", ex3.B, ex3.cb) == 0


def test_v_vrl_equals_v_rl_with_full_support():
    rng = random.Random(5)
    for _ in range(100):
        sc = random_instance(rng, reward_model="full_support")
        for a in sc.env.actions:
            assert abs(v_vrl(a, sc.B, sc.cb) - v_rl(a, sc.B)) <= 1e-9


def test_cp_actions_example4():
    sc = build_example4(exact=True)
    cp = set(cp_actions(sc.env, sc.B, sc.cb))
    for name in ("id", "c0", "swap"):
        assert f"a1.{name}" in cp
    assert "a2.id" in cp
    # with B compiled through the sensor, s2 is CP only when d fixes -1 and 1
    expected_s2 = {f"a2.{d.name}" for d in sc.env.delusions if d(-1) == -1 and d(1) == 1}
    expected_s1 = {f"a1.{d.name}" for d in sc.env.delusions if d(0) == 0}
    assert cp == expected_s1 | expected_s2


def test_cp_actions_toy_only_nondelusional(toy):
    sc, cb = toy
    cp = cp_actions(sc.env, sc.B, cb, 1e-9)
    assert cp == [s.key for s in sc.env.nondelusional_states]


def test_cp_actions_all_consistent():
    rng = random.Random(2)
    sc = random_instance(rng, exact=True)
    ident = [s for s in sc.env.states if s.delusion.is_identity]
    env = Environment(ident, [s.key for s in ident], sc.env.rewards, [UtilityFunction(u.name, {s: u(s) for s in ident}) for u in sc.env.utilities])
    cb = UtilityBelief(dict(zip(env.utilities, sc.cb.prior.values())))
    B = BeliefModel({s.key: {s: 1} for s in ident}, build_reward_model(cb, None, env))
    assert cp_actions(env, B, cb) == list(env.actions)


def test_is_eep_examples(ex3):
    cp = cp_actions(ex3.env, ex3.B, ex3.cb)
    assert all(is_eep(a, ex3.env, ex3.B, ex3.cb) for a in cp)
    assert not is_eep("a2.c1", ex3.env, ex3.B, ex3.cb)
    assert eep_deviation("a2.c1", ex3.B, ex3.cb) == Fraction(2, 3)


def test_is_eep_singleton_class(ex3):
    u1 = ex3.env.utilities[0]
    single = UtilityBelief({u1: Fraction(1)})
    # every predicted reward has C-support, so the posterior is the prior
    B = BeliefModel(ex3.B.transition, {s: {u1(s): 1} for s in ex3.env.states})
    assert all(is_eep(a, ex3.env, B, single) for a in ex3.env.actions)
    # zero-support rewards contribute a zero posterior, breaking EEP
    assert not is_eep("a1.c1", ex3.env, ex3.B, single)


def test_v_reduced_example4():
    sc = build_example4(exact=True)
    for d in sc.env.delusions:
        assert v_reduced(f"a1.{d.name}", sc.B, sc.cb) == 0
        assert v_reduced(f"a2.{d.name}", sc.B, sc.cb) == Fraction(-1, 3)
    for a in cp_actions(sc.env, sc.B, sc.cb):
        assert v_vrl(a, sc.B, sc.cb) == v_reduced(a, sc.B, sc.cb)


def test_choose_examples(ex3):
    assert choose("u_vrl", ex3.env, ex3.B, ex3.cb).chosen == "a2.c1"
    sc4 = build_example4(exact=True)
    table = choose("cp_vrl", sc4.env, sc4.B, sc4.cb)
    assert table.filter_used == "cp"
    assert [s.inner for s, _ in sc4.B.successors(table.chosen)] == ["s1"]
    assert set(table.values) == set(cp_actions(sc4.env, sc4.B, sc4.cb))


def test_choose_rl_toy(toy):
    sc, cb = toy
    table = choose("rl", sc.env, sc.B, cb)
    assert table.chosen.endswith("/del")
    assert table.filter_used == "all"


def test_choose_no_cp_action_raises():
    grid = RewardGrid((0, 1))
    d1 = Delusion.constant(grid, 1, "d1")
    states = product_states(["a"], [Delusion.identity(grid), d1])
    u = UtilityFunction("u", {s: 0 for s in states})
    env = Environment(states, ["wire"], grid, [u])
    cb = UtilityBelief({u: 1})
    B = BeliefModel({"wire": {states[1]: 1}}, build_reward_model(cb, None, env))
    assert cp_actions(env, B, cb) == []
    with pytest.raises(NoCPAction):
        choose("cp_vrl", env, B, cb)


def test_argmax_tie_breaks_on_first():
    assert argmax(["x", "y", "z"], {"x": 1, "y": 2, "z": 2}) == "y"
    assert argmax(["x", "y"], {"x": 0, "y": 0}) == "x"


def test_choose_is_deterministic(toy):
    sc, cb = toy
    a = choose("cp_vrl", sc.env, sc.B, cb, 1e-9)
    b = choose("cp_vrl", sc.env, sc.B, cb, 1e-9)
    assert a == b
