"""Making B and C consistent, plus inner-state-based utility checks.

Two directions are supported:

* prior extraction: recover C(u) from B(r|s) on a few non-delusional
  anchor states by solving ``b = M c`` in the least-squares sense;
* reward-model construction: compile B(r|s) from a prior C(u) and a sensor
  model B(r|s, inner reward).

The second half of the module measures how far a utility function is from
ignoring the delusion component of the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _exact
from .agents import v_utility
from .beliefs import BeliefModel, UtilityBelief, default_tol, is_exact
from .core import DomainError, Environment, RewardGrid, State, UtilityFunction, quantize


class RankDeficient(ValueError):
    """The anchor system does not determine the prior uniquely."""


class InsufficientRank(RankDeficient):
    """No choice of anchor states reaches full column rank."""


class NotADistribution(ValueError):
    """The least-squares solution is not a probability vector within tolerance."""


class ResidualTooLarge(NotADistribution):
    """No prior over the utility class reproduces B(r|s) on the anchors."""


# -- extraction ---------------------------------------------------------------


@dataclass(frozen=True)
class ExtractionProblem:
    """Stacked system ``b = M c``; rows are (anchor, reward), columns utilities."""

    anchor_states: tuple
    utilities: tuple
    rewards: tuple
    M: tuple
    b: tuple

    def __post_init__(self):
        for s in self.anchor_states:
            if not s.delusion.is_identity:
                raise DomainError(f"anchor {s!r} is not non-delusional")
        if len(self.M) != len(self.anchor_states) * len(self.rewards) or len(self.b) != len(self.M):
            raise DomainError("extraction system has the wrong number of rows")

    @property
    def exact(self) -> bool:
        return is_exact(self.b)


def indicator_rows(anchors: Sequence[State], utilities: Sequence[UtilityFunction], rewards) -> list:
    return [[1 if u(s) == r else 0 for u in utilities] for s in anchors for r in rewards]


def extraction_problem(
    env: Environment, B: BeliefModel, anchors: Sequence[State], utilities=None
) -> ExtractionProblem:
    utilities = tuple(utilities or env.utilities)
    rewards = tuple(env.rewards)
    M = indicator_rows(anchors, utilities, rewards)
    b = [B.p_reward(s, r) for s in anchors for r in rewards]
    return ExtractionProblem(tuple(anchors), utilities, rewards, tuple(map(tuple, M)), tuple(b))


@dataclass
class Extraction:
    problem: ExtractionProblem
    belief: UtilityBelief
    rank: int
    raw: list
    residual_norm: float
    validation_slack: object
    method: str
    tol: object

    def to_dict(self) -> dict:
        from .reporting import num

        return {
            "anchors": [s.key for s in self.problem.anchor_states],
            "rank": self.rank,
            "method": self.method,
            "residual_norm": self.residual_norm,
            "tol": num(self.tol),
            "validation_slack": num(self.validation_slack),
            "prior": {u.name: num(p) for u, p in self.belief.items()},
        }


def solve_extraction(problem: ExtractionProblem, tol=None, residual_tol=None) -> Extraction:
    """Least-squares solve, validate, then clip to [0, 1] and renormalize.

    Exact inputs are solved over the rationals.  Raises RankDeficient if M
    lacks full column rank and NotADistribution if the raw solution is
    further than ``tol`` from a distribution or fits worse than
    ``residual_tol``.
    """
    exact = problem.exact
    if tol is None:
        tol = default_tol(exact)
    if residual_tol is None:
        residual_tol = tol
    n = len(problem.utilities)
    rank = _exact.rank(problem.M)
    if rank < n:
        lower = math.ceil(n / len(problem.rewards))
        raise RankDeficient(
            f"M has rank {rank} < {n} utilities; add anchor states "
            f"(at least {lower} are needed in any case)"
        )
    square = len(problem.M) == n
    if exact:
        M = [list(row) for row in problem.M]
        b = [Fraction(x) for x in problem.b]
        c = _exact.solve(M, b) if square else _exact.lstsq(M, b)
        resid_sq = sum((sum(m * x for m, x in zip(row, c)) - bi) ** 2 for row, bi in zip(M, b))
        residual = math.sqrt(resid_sq)
        fits = resid_sq <= residual_tol**2
    else:
        M = np.asarray(problem.M, dtype=float)
        b = np.asarray(problem.b, dtype=float)
        if square:
            c = np.linalg.solve(M, b)
        else:
            c = np.linalg.lstsq(M, b, rcond=None)[0]
        residual = float(np.linalg.norm(M @ c - b))
        c = [float(x) for x in c]
        fits = residual <= residual_tol
    if not fits:
        raise ResidualTooLarge(f"residual {residual:.3g} exceeds {residual_tol!r}")
    violation = max(0, -min(c), abs(sum(c) - 1))
    if violation > tol:
        raise NotADistribution(f"least-squares prior {c} is off the simplex by {violation}")
    clipped = [min(max(x, 0), 1) for x in c]
    total = sum(clipped)
    belief = UtilityBelief({u: x / total for u, x in zip(problem.utilities, clipped)})
    return Extraction(
        problem=problem,
        belief=belief,
        rank=rank,
        raw=c,
        residual_norm=residual,
        validation_slack=tol - violation,
        method="inverse" if square else "lstsq",
        tol=tol,
    )


def extract_prior(problem: ExtractionProblem, tol=None, residual_tol=None) -> UtilityBelief:
    """C(u) recovered from B(r|s) on the anchors of ``problem``."""
    return solve_extraction(problem, tol, residual_tol).belief


def find_anchor_states(
    env: Environment, B: BeliefModel, k: int | None = None, utilities=None
) -> list[State]:
    """Greedily pick non-delusional states that maximize the rank of M.

    With ``k`` given, exactly ``k`` anchors are returned; otherwise anchors
    are added until M has full column rank.  Ties go to the earliest state.
    """
    utilities = list(utilities or env.utilities)
    rewards = list(env.rewards)
    n = len(utilities)
    lower = math.ceil(n / len(rewards))
    candidates = [s for s in env.nondelusional_states if s in B.reward_pred]
    if k is not None and k < lower:
        raise InsufficientRank(f"{k} anchors can never determine {n} utilities over {len(rewards)} rewards")
    if k is not None and k > len(candidates):
        raise InsufficientRank(f"only {len(candidates)} non-delusional states available, {k} requested")
    chosen: list[State] = []
    rank = 0
    while candidates and (len(chosen) < k if k is not None else rank < n):
        scored = [(_exact.rank(indicator_rows(chosen + [s], utilities, rewards)), -i, s) for i, s in enumerate(candidates)]
        rank, _, best = max(scored, key=lambda t: (t[0], t[1]))
        chosen.append(best)
        candidates.remove(best)
    if rank < n:
        raise InsufficientRank(f"greedy anchors {[s.key for s in chosen]} reach rank {rank} < {n}")
    return chosen


def extract(
    env: Environment, B: BeliefModel, k: int | None = None, anchors=None, tol=None, residual_tol=None
) -> Extraction:
    """Pick anchors (unless given) and recover the prior from them."""
    if anchors is None:
        anchors = find_anchor_states(env, B, k)
    return solve_extraction(extraction_problem(env, B, anchors), tol, residual_tol)


# -- reward model from a prior ------------------------------------------------


@dataclass(frozen=True)
class InnerRewardModel:
    """Sensor model B(r|s, inner reward) as ``sensor[(s, inner)][r]``."""

    sensor: Mapping

    def __post_init__(self):
        for (s, inner), row in self.sensor.items():
            probs = list(row.values())
            total = sum(probs)
            if (total != 1) if is_exact(probs) else abs(total - 1) > 1e-12:
                raise DomainError(f"sensor row ({s.key}, {inner}) sums to {total}")
            if s.delusion.is_identity and any(p != (1 if r == inner else 0) for r, p in row.items()):
                raise DomainError(f"non-delusional state {s.key} must observe its inner reward")

    def dist(self, s: State, inner):
        return self.sensor[(s, inner)]

    @classmethod
    def deterministic(cls, env: Environment) -> "InnerRewardModel":
        """B(r|s, inner) = [[r = d_s(inner)]]."""
        return cls({(s, r): {s.delusion(r): 1} for s in env.states for r in env.rewards})


def build_reward_model(cb: UtilityBelief, sensor: InnerRewardModel | None, env: Environment) -> dict:
    """B(r|s) = sum_{u, inner} C(u) [[u(s) = inner]] B(r|s, inner) for every state."""
    if sensor is None:
        sensor = InnerRewardModel.deterministic(env)
    model = {}
    for s in env.states:
        row: dict = {}
        for u, pu in cb.items():
            for r, p in sensor.dist(s, u(s)).items():
                row[r] = row.get(r, 0) + pu * p
        model[s] = {r: row[r] for r in env.rewards if row.get(r, 0) != 0}
    return model


def belief_from_prior(
    env: Environment, transition: Mapping, cb: UtilityBelief, sensor: InnerRewardModel | None = None
) -> BeliefModel:
    return BeliefModel(transition, build_reward_model(cb, sensor, env))


# -- inner state based utilities ---------------------------------------------


def _nondelusional_twin(env: Environment) -> dict:
    twins = {s.inner: s for s in env.nondelusional_states}
    out = {}
    for s in env.states:
        if s.inner not in twins:
            raise DomainError(f"inner state {s.inner!r} has no non-delusional state")
        out[s] = twins[s.inner]
    return out


def eps_isb(u: UtilityFunction, env: Environment):
    """Smallest eps with |u(inner, d) - u(inner, id)| <= eps everywhere."""
    twin = _nondelusional_twin(env)
    return max(abs(u(s) - u(twin[s])) for s in env.states)


def inner_marginal(a, B: BeliefModel) -> dict:
    out: dict = {}
    for s, p in B.successors(a):
        out[s.inner] = out.get(s.inner, 0) + p
    return out


@dataclass
class EpsIsbReport:
    eps: object
    gaps: dict = field(default_factory=dict)

    @property
    def worst_action(self):
        return max(self.gaps, key=lambda a: self.gaps[a]) if self.gaps else None

    @property
    def slack(self):
        return self.eps - max(self.gaps.values(), default=0)

    @property
    def passed(self) -> bool:
        return self.slack >= 0

    def to_dict(self) -> dict:
        from .reporting import num

        return {
            "eps": num(self.eps),
            "worst_action": self.worst_action,
            "slack": num(self.slack),
            "passed": self.passed,
        }


def check_eps_isb_bound(u: UtilityFunction, env: Environment, B: BeliefModel) -> EpsIsbReport:
    """Gap between V_u(a) and the expected utility of the non-delusional twins."""
    twin = {s.inner: t for s, t in _nondelusional_twin(env).items()}
    report = EpsIsbReport(eps_isb(u, env))
    for a in env.actions:
        inner_value = sum(p * u(twin[i]) for i, p in inner_marginal(a, B).items())
        report.gaps[a] = abs(v_utility(a, u, B) - inner_value)
    return report


def reward_maximising_utility(
    inner_utility: Callable[[State], object], env: Environment, name: str = "u_RL"
) -> UtilityFunction:
    """u(s) = d_s(inner_utility(s)): a utility that rewards self-delusion."""
    return UtilityFunction(name, {s: s.delusion(inner_utility(s)) for s in env.states})


def mixture_utility(cb: UtilityBelief, states: Sequence[State], name: str = "mixture") -> UtilityFunction:
    """sum_u C(u) u(s).  Values are generally off the reward grid."""
    return UtilityFunction(name, {s: sum(p * u(s) for u, p in cb.items()) for s in states})


def convolve(bits: str, kernel, k: int):
    """sum over i = 1..|bits|-k of kernel(bits[i:i+k]) (k-bit windows, 1-based i)."""
    if len(bits) < k:
        raise DomainError(f"state string {bits!r} is shorter than the window {k}")
    if any(ch not in "01" for ch in bits):
        raise DomainError(f"{bits!r} is not a binary string")
    f = kernel if callable(kernel) else kernel.__getitem__
    return sum(f(bits[i : i + k]) for i in range(len(bits) - k))


def convolutional_utility(
    kernel,
    k: int,
    states: Sequence[State],
    grid: RewardGrid,
    encode: Callable[[State], str] = lambda s: s.inner,
    name: str = "conv",
) -> UtilityFunction:
    """k-convolutional utility over binary-string encodings of states, snapped to the grid."""
    return UtilityFunction(name, {s: quantize(convolve(encode(s), kernel, k), grid) for s in states})
