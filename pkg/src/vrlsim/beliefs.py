"""Belief distributions B (transitions, reward prediction) and C (utility prior).

Probabilities may be ``fractions.Fraction`` (exact mode) or ``float``.
Every routine is written against plain arithmetic so the same code serves
both; exact inputs give exact outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from types import MappingProxyType
from typing import Iterable, Mapping

from .core import DomainError, Environment, State, UtilityFunction

FLOAT_TOL = 1e-9
NORMALIZATION_TOL = 1e-12


def is_exact(values: Iterable) -> bool:
    return all(isinstance(v, Rational) and not isinstance(v, bool) for v in values)


def default_tol(exact: bool):
    return 0 if exact else FLOAT_TOL


def _check_distribution(what: str, probs: Iterable) -> None:
    probs = list(probs)
    exact = is_exact(probs)
    slack = 0 if exact else NORMALIZATION_TOL
    for p in probs:
        if p < -slack or p > 1 + slack:
            raise DomainError(f"{what}: probability {p!r} outside [0, 1]")
    total = sum(probs)
    if exact:
        if total != 1:
            raise DomainError(f"{what}: probabilities sum to {total}, not 1")
    elif abs(total - 1) > NORMALIZATION_TOL:
        raise DomainError(f"{what}: probabilities sum to {total!r}, not 1")


@dataclass(frozen=True)
class BeliefModel:
    """B(s|a) as ``transition[a][s]`` and B(r|s) as ``reward_pred[s][r]``.

    Missing entries are zero.
    """

    transition: Mapping
    reward_pred: Mapping

    def __post_init__(self):
        transition = {a: MappingProxyType(dict(row)) for a, row in self.transition.items()}
        reward_pred = {s: MappingProxyType(dict(row)) for s, row in self.reward_pred.items()}
        for a, row in transition.items():
            _check_distribution(f"B(.|{a})", row.values())
        for s, row in reward_pred.items():
            _check_distribution(f"B(.|{s.key})", row.values())
        for a, row in transition.items():
            for s, p in row.items():
                if p > 0 and s not in reward_pred:
                    raise DomainError(f"B(r|{s.key}) missing for reachable state under {a}")
        object.__setattr__(self, "transition", MappingProxyType(transition))
        object.__setattr__(self, "reward_pred", MappingProxyType(reward_pred))

    def successors(self, a):
        """(state, B(s|a)) pairs with positive probability."""
        try:
            row = self.transition[a]
        except KeyError:
            raise DomainError(f"no transition row for action {a!r}") from None
        return [(s, p) for s, p in row.items() if p > 0]

    def rewards(self, s: State):
        """(reward, B(r|s)) pairs with positive probability."""
        return [(r, p) for r, p in self.reward_pred[s].items() if p > 0]

    def p_reward(self, s: State, r):
        return self.reward_pred[s].get(r, 0)

    @property
    def exact(self) -> bool:
        return is_exact(
            [p for row in self.transition.values() for p in row.values()]
            + [p for row in self.reward_pred.values() for p in row.values()]
        )


def deterministic_transitions(pairs) -> dict:
    """B(s|a) = [[s = target(a)]] from (action, state) pairs."""
    return {a: {s: 1} for a, s in pairs}


@dataclass(frozen=True)
class UtilityBelief:
    """The prior C(u) over a finite utility class, in class order."""

    prior: Mapping[UtilityFunction, object]

    def __post_init__(self):
        prior = dict(self.prior)
        if not prior:
            raise DomainError("utility prior must be non-empty")
        _check_distribution("C(u)", prior.values())
        object.__setattr__(self, "prior", MappingProxyType(prior))

    @property
    def utilities(self) -> list[UtilityFunction]:
        return list(self.prior)

    @property
    def exact(self) -> bool:
        return is_exact(self.prior.values())

    def __getitem__(self, u):
        return self.prior[u]

    def items(self):
        return self.prior.items()

    @classmethod
    def proportional(cls, weights: Mapping[UtilityFunction, object], exact: bool = True):
        """Normalize nonnegative weights into a prior."""
        if exact:
            weights = {u: Fraction(w) for u, w in weights.items()}
        total = sum(weights.values())
        return cls({u: w / total for u, w in weights.items()})


@dataclass(frozen=True)
class Posterior:
    """C(u|s,r).  ``support`` is false when C(r|s) = 0, and then every weight is 0."""

    weights: Mapping[UtilityFunction, object]
    support: bool

    def __getitem__(self, u):
        return self.weights[u]


def likelihood(u: UtilityFunction, s: State, r) -> int:
    """C(r|s,u) = [[u(s) = r]]."""
    return 1 if u(s) == r else 0


def c_marginal(s: State, cb: UtilityBelief) -> dict:
    """C(r|s) over rewards that some utility can emit at s; other rewards have mass 0."""
    out: dict = {}
    for u, p in cb.items():
        r = u(s)
        out[r] = out.get(r, 0) + p
    return out


def posterior(s: State, r, cb: UtilityBelief) -> Posterior:
    """C(u|s,r) = C(u)[[u(s)=r]] / C(r|s), or the zero vector when C(r|s) = 0."""
    joint = {u: (p if u(s) == r else 0) for u, p in cb.items()}
    evidence = sum(joint.values())
    if evidence == 0:
        return Posterior({u: 0 for u in joint}, False)
    return Posterior({u: w / evidence for u, w in joint.items()}, True)


def expected_utility_given(s: State, r, cb: UtilityBelief):
    """Sum_u C(u|s,r) u(s); 0 on zero support."""
    post = posterior(s, r, cb)
    return sum(w * u(s) for u, w in post.weights.items() if w)


@dataclass
class ConsistencyReport:
    deviations: dict = field(default_factory=dict)
    tol: object = 0

    @property
    def passed(self) -> bool:
        return all(dev <= self.tol for dev in self.deviations.values())

    @property
    def failing(self) -> list[State]:
        return [s for s, dev in self.deviations.items() if dev > self.tol]

    @property
    def max_deviation(self):
        return max(self.deviations.values(), default=0)

    def to_dict(self) -> dict:
        from .reporting import num

        return {
            "tol": num(self.tol),
            "passed": self.passed,
            "max_deviation": num(self.max_deviation),
            "failing_states": [s.key for s in self.failing],
            "deviations": {s.key: num(dev) for s, dev in self.deviations.items()},
        }


def reward_deviation(env: Environment, B: BeliefModel, cb: UtilityBelief, s: State):
    """max_r |B(r|s) - C(r|s)|."""
    marginal = c_marginal(s, cb)
    return max(abs(B.p_reward(s, r) - marginal.get(r, 0)) for r in env.rewards)


def check_consistency(env: Environment, B: BeliefModel, cb: UtilityBelief, tol=None) -> ConsistencyReport:
    """Compare B(r|s) and C(r|s) on every non-delusional state."""
    if tol is None:
        tol = default_tol(B.exact and cb.exact)
    if tol < 0:
        raise DomainError("tolerance must be nonnegative")
    report = ConsistencyReport(tol=tol)
    for s in env.nondelusional_states:
        if s in B.reward_pred:
            report.deviations[s] = reward_deviation(env, B, cb, s)
    return report
