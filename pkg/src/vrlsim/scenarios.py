"""Scenario construction: the worked examples, the toy experiment, JSON files,
and random instances for the invariant suites."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .beliefs import BeliefModel, UtilityBelief, deterministic_transitions
from .consistency import build_reward_model
from .core import (
    Delusion,
    DomainError,
    Environment,
    RewardGrid,
    State,
    UtilityFunction,
    all_delusions,
    product_states,
)

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Malformed scenario file or inconsistent scenario contents."""


@dataclass
class Scenario:
    name: str
    env: Environment
    B: BeliefModel
    cb: UtilityBelief | None = None
    extraction: dict | None = None  # {"k": int} or {"anchors": [state keys]}
    agents: list = field(default_factory=list)  # "rl", "u_vrl", "cp_vrl", "utility:<name>"
    tol: Any = None
    exact: bool = False
    seed: int = 0
    random_suite: int = 0
    curves: list | None = None  # (utility name, code, raw value, quantized value)
    generating_prior: UtilityBelief | None = None  # prior B(r|s) was compiled from

    def __post_init__(self):
        if (self.cb is None) == (self.extraction is None):
            raise ScenarioError("exactly one of a utility prior or an extraction directive is required")
        for kind in self.agents:
            if kind.startswith("utility:"):
                self.env.utility(kind.split(":", 1)[1])
            elif kind not in ("rl", "u_vrl", "cp_vrl"):
                raise ScenarioError(f"unknown agent {kind!r}")


def _prob(x, exact: bool):
    q = Fraction(x) if not isinstance(x, float) else Fraction(str(x))
    return q if exact else float(q)


# -- worked examples ------------------------------------------------------------


def example_delusions(grid: RewardGrid) -> list[Delusion]:
    """All 27 maps on {-1, 0, 1}, the named ones first.

    Order: id, c-1, c0, c1, swap, then the rest lexicographically.
    """
    named = [
        Delusion.identity(grid, "id"),
        Delusion.constant(grid, -1, "c-1"),
        Delusion.constant(grid, 0, "c0"),
        Delusion.constant(grid, 1, "c1"),
        Delusion.from_outputs("swap", grid, [1, 0, -1]),
    ]
    tables = {d.table for d in named}
    return named + [d for d in all_delusions(grid) if d.table not in tables]


def _chess_scenario(name: str, agents: list, exact: bool) -> Scenario:
    grid = RewardGrid((-1, 0, 1))
    delusions = example_delusions(grid)
    states = product_states(["s1", "s2"], delusions)
    u1 = UtilityFunction.inner_based("u1", states, {"s1": 0, "s2": -1}, grid)
    u2 = UtilityFunction.inner_based("u2", states, {"s1": 0, "s2": 1}, grid)
    actions = [f"a{s.inner[1:]}.{s.delusion.name}" for s in states]
    env = Environment(states, actions, grid, (u1, u2))
    cb = UtilityBelief({u1: _prob("2/3", exact), u2: _prob("1/3", exact)})
    transition = deterministic_transitions(zip(actions, states))
    B = BeliefModel(transition, build_reward_model(cb, None, env))
    return Scenario(name, env, B, cb=cb, agents=agents, exact=exact)


def build_example3(exact: bool = False) -> Scenario:
    """Chess agent with two inner states and every delusion on {-1, 0, 1}.

    Action ``a<i>.<delusion>`` leads to inner state ``s<i>`` with that
    delusion.  u1 = (0, -1), u2 = (0, 1) on (s1, s2); prior 2/3, 1/3.
    """
    return _chess_scenario("example3", ["rl", "u_vrl", "utility:u1"], exact)


def build_example4(exact: bool = False) -> Scenario:
    """The example-3 environment with the CP-VRL agent enabled."""
    return _chess_scenario("example4", ["rl", "u_vrl", "cp_vrl"], exact)


# -- toy experiment -------------------------------------------------------------


@dataclass
class ToyConfig:
    n_inner: int = 5
    rewards: tuple = (-3, -2, -1, 0, 1, 2, 3)
    c0: tuple = (0, 5)
    c1: tuple = (-0.5, 0, 0.5)
    c2: tuple = (-2.5, 0, 2.5)
    # subtracted from the formula before snapping: the family spans [-5, 10]
    utility_offset: float = 2.5
    code_offset: int = -10
    anchors: int | None = 2
    tol: Any = None
    exact: bool = False
    seed: int = 0
    random_suite: int = 20


def toy_coefficients(config: ToyConfig | None = None) -> list[tuple]:
    """(c0, c1, c2) with at most one of c1, c2 nonzero, in prior order.

    Sorted by the number of nonzero coefficients among c1, c2, then by c0,
    c1, c2.
    """
    config = config or ToyConfig()
    combos = [
        (c0, c1, c2)
        for c0 in config.c0
        for c1 in config.c1
        for c2 in config.c2
        if c1 == 0 or c2 == 0
    ]
    return sorted(combos, key=lambda c: ((c[1] != 0) + (c[2] != 0), c))


def toy_formula(c, code: int) -> float:
    c0, c1, c2 = c
    return c0 + c1 * code + c2 * math.sin(code + c2)


def toy_delusions(grid: RewardGrid) -> list[Delusion]:
    lo, hi = grid.values[0], grid.values[-1]
    return [
        Delusion.identity(grid, "id"),
        Delusion.from_function("inv", grid, lambda r: -r),
        Delusion.constant(grid, lo, "bad"),
        Delusion.constant(grid, hi, "del"),
    ]


def build_toy_model(config: ToyConfig | None = None) -> Scenario:
    """20 states (5 inner x 4 delusions), 10 formula utilities, B(u) ∝ 1/#u.

    B(r|s) is compiled from the generating prior through the deterministic
    sensor; the agent's C(u) is then extracted from anchor states.
    """
    config = config or ToyConfig()
    exact = config.exact
    grid = RewardGrid(tuple(config.rewards))
    states = product_states([f"i{k}" for k in range(config.n_inner)], toy_delusions(grid), config.code_offset)
    utilities, curves = [], []
    for k, c in enumerate(toy_coefficients(config), start=1):
        raw = {s: toy_formula(c, s.code) - config.utility_offset for s in states}
        u = UtilityFunction.from_function(f"u{k}", states, raw.__getitem__, grid)
        utilities.append(u)
        curves.extend((u.name, s.code, raw[s], u(s)) for s in sorted(states, key=lambda s: s.code))
    actions = [s.key for s in states]
    env = Environment(states, actions, grid, utilities)
    generating = UtilityBelief.proportional(
        {u: Fraction(1, k) for k, u in enumerate(utilities, start=1)}, exact=True
    )
    if not exact:
        generating = UtilityBelief({u: float(p) for u, p in generating.items()})
    B = BeliefModel(deterministic_transitions(zip(actions, states)), build_reward_model(generating, None, env))
    return Scenario(
        "toy",
        env,
        B,
        extraction={"k": config.anchors},
        agents=["rl", "cp_vrl"],
        tol=config.tol,
        exact=exact,
        seed=config.seed,
        random_suite=config.random_suite,
        curves=curves,
        generating_prior=generating,
    )


# -- scenario files -------------------------------------------------------------


def _field(doc: dict, key: str, path: str, default=...):
    if key in doc:
        return doc[key]
    if default is ...:
        raise ScenarioError(f"{path}: missing field {key!r}")
    return default


def _reward(grid: RewardGrid, key, path: str):
    try:
        value = Fraction(str(key))
    except (ValueError, ZeroDivisionError):
        raise ScenarioError(f"{path}: {key!r} is not a number") from None
    for r in grid:
        if r == value:
            return r
    raise ScenarioError(f"{path}: reward {key!r} is not on the grid")


def _state(env_states: dict, key: str, path: str) -> State:
    try:
        return env_states[key]
    except KeyError:
        raise ScenarioError(f"{path}: unknown state {key!r}") from None


def _distribution(raw, path: str, exact: bool, key_fn) -> dict:
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: expected an object")
    try:
        return {key_fn(k, f"{path}.{k}"): _prob(v, exact) for k, v in raw.items()}
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"{path}: bad probability ({exc})") from None


def scenario_from_dict(doc: dict, exact: bool | None = None) -> Scenario:
    """Build a Scenario from the JSON scenario schema (see README)."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario: top level must be an object")
    version = _field(doc, "schema_version", "scenario")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"scenario.schema_version: unsupported version {version!r}")
    if exact is None:
        exact = bool(doc.get("exact", False))
    try:
        grid = RewardGrid(tuple(Fraction(str(r)) if not isinstance(r, int) else r for r in _field(doc, "rewards", "scenario")))
    except (DomainError, ValueError) as exc:
        raise ScenarioError(f"scenario.rewards: {exc}") from None

    delusions = []
    for dname, spec in _field(doc, "delusions", "scenario", {"id": "identity"}).items():
        path = f"scenario.delusions.{dname}"
        try:
            if spec == "identity":
                delusions.append(Delusion.identity(grid, dname))
            elif isinstance(spec, list):
                delusions.append(Delusion.from_outputs(dname, grid, [_reward(grid, r, path) for r in spec]))
            else:
                raise ScenarioError(f"{path}: expected \"identity\" or a list of outputs")
        except DomainError as exc:
            raise ScenarioError(f"{path}: {exc}") from None
    by_name = {d.name: d for d in delusions}

    inners = [str(i) for i in _field(doc, "inner_states", "scenario")]
    offset = int(doc.get("code_offset", 0))
    if "states" in doc:
        states = []
        for k, pair in enumerate(doc["states"]):
            path = f"scenario.states[{k}]"
            if not (isinstance(pair, list) and len(pair) == 2) or pair[1] not in by_name:
                raise ScenarioError(f"{path}: expected [inner, delusion-name]")
            if pair[0] not in inners:
                raise ScenarioError(f"{path}: unknown inner state {pair[0]!r}")
            i, j = inners.index(pair[0]), delusions.index(by_name[pair[1]])
            states.append(State(pair[0], by_name[pair[1]], i * len(delusions) + j + offset))
    else:
        states = product_states(inners, delusions, offset)
    state_map = {s.key: s for s in states}

    utilities = []
    for k, spec in enumerate(_field(doc, "utilities", "scenario")):
        path = f"scenario.utilities[{k}]"
        name = _field(spec, "name", path)
        if "inner" in spec:
            values = {i: _reward_value(spec["inner"], i, path) for i in inners}
            fn = lambda s, values=values: values[s.inner]
        elif "table" in spec:
            table = {_state(state_map, key, f"{path}.table").key: v for key, v in spec["table"].items()}
            missing = [s.key for s in states if s.key not in table]
            if missing:
                raise ScenarioError(f"{path}.table: no value for {missing[0]!r}")
            fn = lambda s, table=table: Fraction(str(table[s.key]))
        elif "formula" in spec:
            c = tuple(float(x) for x in spec["formula"])
            shift = float(spec.get("offset", 0))
            fn = lambda s, c=c, shift=shift: toy_formula(c, s.code) - shift
        else:
            raise ScenarioError(f"{path}: needs one of \"inner\", \"table\", \"formula\"")
        utilities.append(UtilityFunction.from_function(name, states, fn, grid))
    unames = {u.name: u for u in utilities}

    actions_doc = _field(doc, "actions", "scenario")
    if actions_doc == "states":
        actions = [s.key for s in states]
        transition = deterministic_transitions(zip(actions, states))
    elif isinstance(actions_doc, dict):
        actions = list(actions_doc)
        transition = {
            a: _distribution(row, f"scenario.actions.{a}", exact, lambda key, p: _state(state_map, key, p))
            for a, row in actions_doc.items()
        }
    else:
        raise ScenarioError("scenario.actions: expected \"states\" or an object of transition rows")

    try:
        env = Environment(states, actions, grid, utilities)
    except DomainError as exc:
        raise ScenarioError(f"scenario: {exc}") from None

    def prior_from(raw, path):
        dist = _distribution(raw, path, exact, lambda key, p: _lookup(unames, key, p))
        for u in utilities:
            dist.setdefault(u, 0 if not exact else Fraction(0))
        try:
            return UtilityBelief({u: dist[u] for u in utilities})
        except DomainError as exc:
            raise ScenarioError(f"{path}: {exc}") from None

    cb = prior_from(doc["prior"], "scenario.prior") if "prior" in doc else None
    extraction = None
    generating = None
    if "extract" in doc:
        ext = doc["extract"]
        extraction = {}
        if isinstance(ext.get("anchors"), list):
            extraction["anchors"] = [_state(state_map, key, "scenario.extract.anchors").key for key in ext["anchors"]]
        else:
            extraction["k"] = ext.get("anchors")
        if "generating_prior" in ext:
            generating = prior_from(ext["generating_prior"], "scenario.extract.generating_prior")

    reward_doc = doc.get("reward_model", "sensor")
    if reward_doc == "sensor":
        source = cb if cb is not None else generating
        if source is None:
            raise ScenarioError("scenario.reward_model: \"sensor\" needs a prior or extract.generating_prior")
        reward_pred = build_reward_model(source, None, env)
    elif isinstance(reward_doc, dict):
        reward_pred = {
            _state(state_map, key, "scenario.reward_model"): _distribution(
                row, f"scenario.reward_model.{key}", exact, lambda k, p: _reward(grid, k, p)
            )
            for key, row in reward_doc.items()
        }
    else:
        raise ScenarioError("scenario.reward_model: expected \"sensor\" or an object")
    try:
        B = BeliefModel(transition, reward_pred)
    except DomainError as exc:
        raise ScenarioError(f"scenario: {exc}") from None

    agents = list(doc.get("agents", ["rl", "u_vrl", "cp_vrl"]))
    tol = doc.get("tol")
    if tol is not None:
        tol = _prob(tol, exact) if exact else float(tol)
    return Scenario(
        str(doc.get("name", "scenario")),
        env,
        B,
        cb=cb,
        extraction=extraction,
        agents=agents,
        tol=tol,
        exact=exact,
        seed=int(doc.get("seed", 0)),
        random_suite=int(doc.get("random_suite", 0)),
        generating_prior=generating,
    )


def _reward_value(values: dict, inner: str, path: str):
    if inner not in values:
        raise ScenarioError(f"{path}.inner: no value for {inner!r}")
    return Fraction(str(values[inner]))


def _lookup(mapping: dict, key, path: str):
    if key not in mapping:
        raise ScenarioError(f"{path}: unknown utility {key!r}")
    return mapping[key]


def load_scenario(path, exact: bool | None = None) -> Scenario:
    with open(path) as f:
        text = f.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(doc, exact)


# -- random instances -------------------------------------------------------------


def _random_simplex(rng: random.Random, n: int, exact: bool, denom: int = 12) -> list:
    """A random point on the n-simplex with every entry positive."""
    weights = [rng.randint(1, denom) for _ in range(n)]
    total = sum(weights)
    if exact:
        return [Fraction(w, total) for w in weights]
    return [w / total for w in weights]


def random_instance(
    rng: random.Random,
    *,
    exact: bool = False,
    reward_model: str = "sensor",
    max_states: int = 6,
    max_utilities: int = 5,
    max_rewards: int = 5,
    max_actions: int = 4,
    isb: bool = False,
) -> Scenario:
    """A small random scenario that satisfies every type invariant.

    ``reward_model="sensor"`` compiles B(r|s) from the prior through random
    deterministic delusions; ``"full_support"`` draws B(r|s) at random but
    only on rewards some utility can emit at s.
    """
    n_rewards = rng.randint(2, max_rewards)
    grid = RewardGrid(tuple(sorted(rng.sample(range(-5, 6), n_rewards))))
    n_inner = rng.randint(1, 3)
    n_delusions = rng.randint(1, max(1, max_states // n_inner))
    delusions = [Delusion.identity(grid, "id")]
    for k in range(1, n_delusions):
        if rng.random() < 0.4:
            perm = list(range(n_rewards))
            rng.shuffle(perm)
            table = tuple(perm)
        else:
            table = tuple(rng.randrange(n_rewards) for _ in range(n_rewards))
        delusions.append(Delusion(f"d{k}", grid, table))
    states = product_states([f"i{k}" for k in range(n_inner)], delusions)

    utilities = []
    for k in range(rng.randint(1, max_utilities)):
        if isb:
            values = {i: rng.choice(grid.values) for i in range(n_inner)}
            table = {s: values[int(s.inner[1:])] for s in states}
        else:
            table = {s: rng.choice(grid.values) for s in states}
        utilities.append(UtilityFunction(f"u{k}", table))
    cb = UtilityBelief(dict(zip(utilities, _random_simplex(rng, len(utilities), exact))))

    actions = [f"a{k}" for k in range(rng.randint(1, max_actions))]
    transition = {}
    for a in actions:
        support = rng.sample(states, rng.randint(1, min(3, len(states))))
        transition[a] = dict(zip(support, _random_simplex(rng, len(support), exact)))

    env = Environment(states, actions, grid, utilities)
    if reward_model == "sensor":
        reward_pred = build_reward_model(cb, None, env)
    elif reward_model == "full_support":
        reward_pred = {}
        for s in states:
            emitted = sorted({u(s) for u in utilities})
            keep = rng.sample(emitted, rng.randint(1, len(emitted)))
            reward_pred[s] = dict(zip(keep, _random_simplex(rng, len(keep), exact)))
    else:
        raise ValueError(f"unknown reward model {reward_model!r}")
    B = BeliefModel(transition, reward_pred)
    return Scenario("random", env, B, cb=cb, agents=["rl", "u_vrl"], exact=exact)
