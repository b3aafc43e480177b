"""Value functions, the consistency-preserving action filter, and agent selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .beliefs import (
    BeliefModel,
    UtilityBelief,
    c_marginal,
    default_tol,
    expected_utility_given,
    posterior,
)
from .core import DomainError, Environment, UtilityFunction

RL = "rl"
UTILITY = "utility"
U_VRL = "u_vrl"
CP_VRL = "cp_vrl"
AGENT_KINDS = (RL, UTILITY, U_VRL, CP_VRL)


class NoCPAction(RuntimeError):
    """The CP-VRL agent has no consistency preserving action to choose from."""


def v_rl(a, B: BeliefModel):
    """Expected observed reward: sum_{s,r} B(s|a) B(r|s) r."""
    return sum(ps * sum(pr * r for r, pr in B.rewards(s)) for s, ps in B.successors(a))


def v_utility(a, u: UtilityFunction, B: BeliefModel):
    """Expected utility of a fixed u: sum_s B(s|a) u(s)."""
    return sum(ps * u(s) for s, ps in B.successors(a))


def v_vrl(a, B: BeliefModel, cb: UtilityBelief):
    """sum_{s,r,u} B(s|a) B(r|s) C(u|s,r) u(s).

    Rewards with C(r|s) = 0 contribute nothing.
    """
    return sum(
        ps * sum(pr * expected_utility_given(s, r, cb) for r, pr in B.rewards(s))
        for s, ps in B.successors(a)
    )


def v_reduced(a, B: BeliefModel, cb: UtilityBelief):
    """Prior-weighted expected utility: sum_{s,u} B(s|a) C(u) u(s)."""
    return sum(ps * sum(pu * u(s) for u, pu in cb.items()) for s, ps in B.successors(a))


def is_cp(a, env: Environment, B: BeliefModel, cb: UtilityBelief, tol=None) -> bool:
    if tol is None:
        tol = default_tol(B.exact and cb.exact)
    for s, _ in B.successors(a):
        marginal = c_marginal(s, cb)
        if any(abs(B.p_reward(s, r) - marginal.get(r, 0)) > tol for r in env.rewards):
            return False
    return True


def cp_actions(env: Environment, B: BeliefModel, cb: UtilityBelief, tol=None) -> list:
    """Actions whose every reachable state has B(.|s) = C(.|s) up to ``tol``.

    Returned in scenario order; may be empty.
    """
    if tol is not None and tol < 0:
        raise DomainError("tolerance must be nonnegative")
    return [a for a in env.actions if is_cp(a, env, B, cb, tol)]


def eep_deviation(a, B: BeliefModel, cb: UtilityBelief):
    """max over u and reachable s of |C(u) - sum_r B(r|s) C(u|s,r)|."""
    worst = 0
    for s, _ in B.successors(a):
        expected = {u: 0 for u in cb.utilities}
        for r, pr in B.rewards(s):
            post = posterior(s, r, cb)
            for u, w in post.weights.items():
                expected[u] += pr * w
        for u, pu in cb.items():
            worst = max(worst, abs(pu - expected[u]))
    return worst


def is_eep(a, env: Environment, B: BeliefModel, cb: UtilityBelief, tol=None) -> bool:
    if tol is None:
        tol = default_tol(B.exact and cb.exact)
    return eep_deviation(a, B, cb) <= tol


@dataclass(frozen=True)
class ActionValueTable:
    agent: str
    values: dict
    chosen: object
    filter_used: str  # "all" or "cp"

    def to_dict(self) -> dict:
        from .reporting import num

        return {
            "agent": self.agent,
            "filter": self.filter_used,
            "chosen": self.chosen,
            "chosen_value": num(self.values[self.chosen]),
            "values": {a: num(v) for a, v in self.values.items()},
        }


def argmax(actions: Sequence, values: dict):
    """First action (scenario order) attaining the maximum."""
    best = None
    for a in actions:
        if best is None or values[a] > values[best]:
            best = a
    return best


def choose(
    agent_kind: str,
    env: Environment,
    B: BeliefModel,
    cb: UtilityBelief | None = None,
    tol=None,
    utility: UtilityFunction | None = None,
) -> ActionValueTable:
    """Evaluate one agent's value function and pick its action.

    ``agent_kind`` is one of ``rl``, ``utility`` (requires ``utility``),
    ``u_vrl`` or ``cp_vrl``.  Raises NoCPAction if the CP-VRL agent has no
    CP action.
    """
    if agent_kind == RL:
        allowed, label = env.actions, RL
        value = lambda a: v_rl(a, B)
    elif agent_kind == UTILITY:
        if utility is None:
            raise DomainError("utility agent needs a utility function")
        allowed, label = env.actions, f"utility({utility.name})"
        value = lambda a: v_utility(a, utility, B)
    elif agent_kind in (U_VRL, CP_VRL):
        if cb is None:
            raise DomainError(f"{agent_kind} agent needs a utility prior")
        value = lambda a: v_vrl(a, B, cb)
        label = agent_kind
        if agent_kind == U_VRL:
            allowed = env.actions
        else:
            allowed = cp_actions(env, B, cb, tol)
            if not allowed:
                raise NoCPAction("no consistency preserving action is available")
    else:
        raise DomainError(f"unknown agent kind {agent_kind!r}")
    values = {a: value(a) for a in allowed}
    return ActionValueTable(label, values, argmax(allowed, values), "cp" if agent_kind == CP_VRL else "all")
