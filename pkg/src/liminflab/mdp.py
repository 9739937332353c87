"""Countably infinite MDPs with rewarded transitions, lazily generated.

States are opaque hashables.  Gadget states carry structured coordinates
(block index, role tag, branch, intra-chain offset, and a row for the
restart families) with a canonical textual form used in logs and golden
files: ``g{n}/{role}/{branch}/{offset}`` plus ``/r{row}`` when nonzero.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, List, Optional, Sequence, Tuple, Union

StateId = Hashable
Prob = Union[Fraction, float]


class UnknownState(KeyError):
    """The state generator rejects this id."""


class BadChoice(ValueError):
    """Invalid edge choice while extending a run."""


class InfiniteBranching(ValueError):
    """Operation requires a finitely branching MDP."""


class StateKind(enum.Enum):
    CONTROLLED = "controlled"
    RANDOM = "random"


@dataclass(frozen=True)
class OutEdge:
    """One transition: target, reward, and (at random states) probability."""

    target: StateId
    reward: Union[Fraction, int]
    probability: Optional[Prob] = None


@dataclass(frozen=True)
class InfiniteFan:
    """Indexed successor family for an infinitely branching state.

    ``edge_at(i)`` yields the i-th canonical edge (i >= 0); the declared
    ``tail_mass(i)`` bounds the probability mass beyond the first i edges
    so validation can reason about unprobed branches.  Controlled fans
    leave tail_mass at None.
    """

    edge_at: Callable[[int], OutEdge]
    tail_mass: Optional[Callable[[int], Fraction]] = None


Successors = Union[Sequence[OutEdge], InfiniteFan]


@dataclass(frozen=True)
class CountableMdp:
    """Lazily generated MDP: pure generator functions over state ids."""

    initial: StateId
    kind_of: Callable[[StateId], StateKind]
    successors_of: Callable[[StateId], Successors]
    finitely_branching: bool = True

    def kind(self, s: StateId) -> StateKind:
        return self.kind_of(s)

    def is_random(self, s: StateId) -> bool:
        return self.kind_of(s) is StateKind.RANDOM

    def edges(self, s: StateId) -> List[OutEdge]:
        """Full finite edge list; raises on infinite fans."""
        succ = self.successors_of(s)
        if isinstance(succ, InfiniteFan):
            raise InfiniteBranching(f"state {s!r} has an infinite successor fan")
        out = list(succ)
        if not out:
            raise UnknownState(f"state {s!r} generated no successors")
        return out


def successors(mdp: CountableMdp, s: StateId, limit: int) -> List[OutEdge]:
    """First ``limit`` edges of s in canonical order (deterministic)."""
    succ = mdp.successors_of(s)
    if isinstance(succ, InfiniteFan):
        return [succ.edge_at(i) for i in range(limit)]
    out = list(succ)
    if not out:
        raise UnknownState(f"state {s!r} generated no successors")
    return out[:limit]


@dataclass(frozen=True)
class ValidationReport:
    state: StateId
    nonempty: bool
    probability_ok: Optional[bool]  # None for controlled states
    probability_deficit: Optional[Fraction]
    probed_edges: int
    partial_sum_only: bool = False

    @property
    def ok(self) -> bool:
        return self.nonempty and self.probability_ok is not False


def validate_local(
    mdp: CountableMdp, s: StateId, tol: Fraction = Fraction(0), probe: int = 64
) -> ValidationReport:
    """Check nonempty successors and probability mass at one state.

    For infinite fans the probed prefix plus the declared tail mass must
    cover 1 within tol; the report flags that only a partial sum was
    seen.
    """
    succ = mdp.successors_of(s)
    if isinstance(succ, InfiniteFan):
        edges = [succ.edge_at(i) for i in range(probe)]
        nonempty = bool(edges)
        if not mdp.is_random(s):
            return ValidationReport(s, nonempty, None, None, len(edges), True)
        mass = _mass(edges)
        tail = succ.tail_mass(probe) if succ.tail_mass is not None else None
        if tail is None:
            deficit = Fraction(1) - mass  # unbounded tail unknown
            ok = deficit >= -tol
        else:
            deficit = Fraction(1) - mass - Fraction(tail)
            ok = abs(deficit) <= tol
        return ValidationReport(s, nonempty, ok, deficit, len(edges), True)

    edges = list(succ)
    nonempty = bool(edges)
    if not mdp.is_random(s):
        return ValidationReport(s, nonempty, None, None, len(edges))
    mass = _mass(edges)
    deficit = Fraction(1) - mass
    exact = all(isinstance(e.probability, (Fraction, int)) for e in edges)
    ok = deficit == 0 if (exact and tol == 0) else abs(deficit) <= tol
    return ValidationReport(s, nonempty, ok, deficit, len(edges))


def _mass(edges: Iterable[OutEdge]) -> Fraction:
    total = Fraction(0)
    for e in edges:
        if e.probability is None:
            raise BadChoice(f"random state edge without probability: {e}")
        total += Fraction(e.probability)
    return total


@dataclass
class RunPrefix:
    """Alternating s0 e0 s1 e1 ... prefix; edges are (state, OutEdge)."""

    states: List[StateId]
    edges: List[OutEdge] = field(default_factory=list)

    @classmethod
    def start(cls, s0: StateId) -> "RunPrefix":
        return cls(states=[s0])

    def state(self, i: int) -> StateId:
        return self.states[i]

    def edge(self, i: int) -> OutEdge:
        return self.edges[i]

    @property
    def last(self) -> StateId:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def rewards(self) -> List[Fraction]:
        return [Fraction(e.reward) for e in self.edges]


def extend_run(
    mdp: CountableMdp,
    run: RunPrefix,
    choice: Optional[int] = None,
    rng=None,
) -> RunPrefix:
    """Append exactly one transition.

    Controlled states take an edge index; random states draw from the
    edge distribution using ``rng`` (anything with ``random()``).  The
    draw is reproducible: same rng state, same branch.
    """
    s = run.last
    if mdp.is_random(s):
        if choice is not None:
            raise BadChoice(f"edge index supplied at random state {s!r}")
        if rng is None:
            raise BadChoice(f"random state {s!r} needs a seed stream")
        edge = _draw(mdp, s, rng)
    else:
        if choice is None:
            raise BadChoice(f"controlled state {s!r} needs an edge index")
        succ = mdp.successors_of(s)
        if isinstance(succ, InfiniteFan):
            if choice < 0:
                raise BadChoice(f"edge index {choice} out of range at {s!r}")
            edge = succ.edge_at(choice)
        else:
            edges = list(succ)
            if not 0 <= choice < len(edges):
                raise BadChoice(f"edge index {choice} out of range at {s!r}")
            edge = edges[choice]
    run.states.append(edge.target)
    run.edges.append(edge)
    return run


def _draw(mdp: CountableMdp, s: StateId, rng) -> OutEdge:
    succ = mdp.successors_of(s)
    u = rng.random()
    acc = 0.0
    if isinstance(succ, InfiniteFan):
        i = 0
        while True:
            e = succ.edge_at(i)
            acc += float(e.probability)
            if u < acc:
                return e
            i += 1
            if i > 10 ** 7:
                raise InfiniteBranching("draw failed to terminate on fan")
    edges = list(succ)
    for e in edges:
        acc += float(e.probability)
        if u < acc:
            return e
    return edges[-1]  # rounding slack lands on the last edge


# ------------------------------------------------------------------
# Structured gadget state ids


ROLES = ("s", "up", "c", "down", "gate", "pad", "rst", "blk", "x", "w")


@dataclass(frozen=True)
class GadgetState:
    """Structured coordinates: block n, role tag, branch, offset, row."""

    n: int
    role: str
    branch: int = -1
    offset: int = 0
    row: int = 0

    def canonical(self) -> str:
        base = f"g{self.n}/{self.role}/{self.branch}/{self.offset}"
        return f"{base}/r{self.row}" if self.row else base

    def __str__(self) -> str:
        return self.canonical()


BOTTOM = GadgetState(-1, "x", -1, 0)  # the single absorbing losing sink


def parse_gadget_state(text: str) -> GadgetState:
    """Inverse of GadgetState.canonical (round-trips exactly)."""
    parts = text.split("/")
    if len(parts) not in (4, 5) or not parts[0].startswith("g"):
        raise UnknownState(f"not a canonical gadget id: {text!r}")
    n = int(parts[0][1:])
    role = parts[1]
    branch = int(parts[2])
    offset = int(parts[3])
    row = 0
    if len(parts) == 5:
        if not parts[4].startswith("r"):
            raise UnknownState(f"bad row tag in {text!r}")
        row = int(parts[4][1:])
    return GadgetState(n, role, branch, offset, row)
