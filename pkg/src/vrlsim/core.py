"""Domain model: reward grids, self-delusions, states, utility functions, environments.

Every other module in the package works only with these types.  All of
them are immutable once built.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence


class DomainError(ValueError):
    """A value or state falls outside the domain an operation is defined on."""


@dataclass(frozen=True)
class RewardGrid:
    """The finite, strictly increasing set of rewards R."""

    values: tuple

    def __post_init__(self):
        values = tuple(self.values)
        if not values:
            raise DomainError("reward grid must be non-empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise DomainError(f"reward grid must be strictly increasing: {values}")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __contains__(self, r):
        i = bisect.bisect_left(self.values, r)
        return i < len(self.values) and self.values[i] == r

    def index(self, r) -> int:
        i = bisect.bisect_left(self.values, r)
        if i == len(self.values) or self.values[i] != r:
            raise DomainError(f"{r!r} is not on the reward grid {self.values}")
        return i


def quantize(x, grid: RewardGrid):
    """Nearest grid element to ``x``; ties go to the smaller element, values
    past either end clamp to that end."""
    values = grid.values
    i = bisect.bisect_left(values, x)
    if i == 0:
        return values[0]
    if i == len(values):
        return values[-1]
    lo, hi = values[i - 1], values[i]
    return hi if hi - x < x - lo else lo


@dataclass(frozen=True)
class Delusion:
    """A self-delusion d: R -> R stored as an index table over the grid.

    ``table[i]`` is the grid index of d(grid.values[i]).
    """

    name: str
    grid: RewardGrid
    table: tuple

    def __post_init__(self):
        table = tuple(int(j) for j in self.table)
        if len(table) != len(self.grid):
            raise DomainError(f"delusion {self.name!r} is not total on the grid")
        if any(not 0 <= j < len(self.grid) for j in table):
            raise DomainError(f"delusion {self.name!r} maps off the grid")
        object.__setattr__(self, "table", table)

    @classmethod
    def from_function(cls, name: str, grid: RewardGrid, fn: Callable) -> "Delusion":
        return cls(name, grid, tuple(grid.index(fn(r)) for r in grid))

    @classmethod
    def from_outputs(cls, name: str, grid: RewardGrid, outputs: Sequence) -> "Delusion":
        """Build from the list of images of ``grid.values`` in grid order."""
        if len(outputs) != len(grid):
            raise DomainError(f"delusion {name!r} needs {len(grid)} outputs, got {len(outputs)}")
        return cls(name, grid, tuple(grid.index(r) for r in outputs))

    @classmethod
    def identity(cls, grid: RewardGrid, name: str = "id") -> "Delusion":
        return cls(name, grid, tuple(range(len(grid))))

    @classmethod
    def constant(cls, grid: RewardGrid, r, name: str | None = None) -> "Delusion":
        j = grid.index(r)
        return cls(name or f"const{r}", grid, (j,) * len(grid))

    @property
    def is_identity(self) -> bool:
        return self.table == tuple(range(len(self.grid)))

    @property
    def outputs(self) -> tuple:
        return tuple(self.grid.values[j] for j in self.table)

    def __call__(self, r):
        return apply_delusion(self, r)


def apply_delusion(d: Delusion, inner_reward):
    """Observed reward d(inner_reward)."""
    return d.grid.values[d.table[d.grid.index(inner_reward)]]


def all_delusions(grid: RewardGrid) -> list[Delusion]:
    """Every map R -> R, in lexicographic order of their output index tables."""
    n = len(grid)
    out = []

    def rec(prefix):
        if len(prefix) == n:
            outputs = ",".join(str(grid.values[j]) for j in prefix)
            out.append(Delusion(f"d({outputs})", grid, tuple(prefix)))
            return
        for j in range(n):
            rec(prefix + [j])

    rec([])
    return out


@dataclass(frozen=True)
class State:
    """An outcome s = (inner state, self-delusion)."""

    inner: str
    delusion: Delusion
    code: int = 0

    @property
    def key(self) -> str:
        return f"{self.inner}/{self.delusion.name}"

    def __repr__(self):
        return f"State({self.key})"


def product_states(
    inners: Sequence[str], delusions: Sequence[Delusion], offset: int = 0
) -> list[State]:
    """All (inner, delusion) pairs, inner-major.

    code = inner_index * len(delusions) + delusion_index + offset, so codes
    cover a contiguous integer range.
    """
    nd = len(delusions)
    return [
        State(inner, d, i * nd + j + offset)
        for i, inner in enumerate(inners)
        for j, d in enumerate(delusions)
    ]


@dataclass(frozen=True, eq=False)
class UtilityFunction:
    """A utility u: S -> R.  Compared and hashed by identity.

    ``isb`` is derived from the table: true iff the value never depends on
    the delusion part of a state.
    """

    name: str
    table: Mapping[State, object]
    isb: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "table", MappingProxyType(dict(self.table)))
        by_inner: dict[str, set] = {}
        for s, v in self.table.items():
            by_inner.setdefault(s.inner, set()).add(v)
        object.__setattr__(self, "isb", all(len(vs) == 1 for vs in by_inner.values()))

    def __call__(self, s: State):
        try:
            return self.table[s]
        except KeyError:
            raise DomainError(f"utility {self.name!r} is not defined on {s!r}") from None

    def __repr__(self):
        return f"UtilityFunction({self.name!r})"

    @classmethod
    def from_function(
        cls, name: str, states: Iterable[State], fn: Callable[[State], object], grid: RewardGrid
    ) -> "UtilityFunction":
        """Tabulate ``fn`` on ``states``, snapping every output onto ``grid``."""
        return cls(name, {s: quantize(fn(s), grid) for s in states})

    @classmethod
    def inner_based(
        cls, name: str, states: Iterable[State], values: Mapping[str, object], grid: RewardGrid
    ) -> "UtilityFunction":
        """An isb utility given by its value on each inner state."""
        return cls.from_function(name, states, lambda s: values[s.inner], grid)


@dataclass(frozen=True)
class Environment:
    states: tuple
    actions: tuple
    rewards: RewardGrid
    utilities: tuple

    def __post_init__(self):
        for attr in ("states", "actions", "utilities"):
            seq = tuple(getattr(self, attr))
            if not seq:
                raise DomainError(f"environment {attr} must be non-empty")
            object.__setattr__(self, attr, seq)
        if len(set(self.actions)) != len(self.actions):
            raise DomainError("duplicate action identifiers")
        pairs = [(s.inner, s.delusion.name) for s in self.states]
        if len(set(pairs)) != len(pairs):
            raise DomainError("(inner, delusion) pairs must be unique")
        if len({s.code for s in self.states}) != len(self.states):
            raise DomainError("state codes must be unique")
        for s in self.states:
            if s.delusion.grid != self.rewards:
                raise DomainError(f"delusion of {s!r} is not over the environment's reward grid")
        for u in self.utilities:
            for s in self.states:
                if u(s) not in self.rewards:
                    raise DomainError(f"utility {u.name!r} takes off-grid value at {s!r}")

    def state(self, key: str) -> State:
        for s in self.states:
            if s.key == key:
                return s
        raise DomainError(f"no state {key!r}")

    def utility(self, name: str) -> UtilityFunction:
        for u in self.utilities:
            if u.name == name:
                return u
        raise DomainError(f"no utility {name!r}")

    @property
    def inner_states(self) -> list[str]:
        return list(dict.fromkeys(s.inner for s in self.states))

    @property
    def delusions(self) -> list[Delusion]:
        return list(dict.fromkeys(s.delusion for s in self.states))

    @property
    def nondelusional_states(self) -> list[State]:
        return [s for s in self.states if s.delusion.is_identity]


def is_isb(u: UtilityFunction, env: Environment) -> bool:
    """True iff u(s, d) = u(s, d') for every inner state and delusion pair."""
    seen: dict[str, object] = {}
    for s in env.states:
        v = u(s)
        if seen.setdefault(s.inner, v) != v:
            return False
    return True
