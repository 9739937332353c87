"""Payoff monitors and finite-horizon verdicts for liminf objectives.

A monitor folds the reward stream into the three payoff sequences
(point, mean, total).  Verdicts are three-valued: membership of a
liminf objective is not prefix-decidable, so a prefix only certifies a
win or loss when combined with declared structural facts (absorbing
losing sink, absorbing zero-reward winning region).
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, List, Optional, Set, Union

from .mdp import (
    BOTTOM,
    CountableMdp,
    GadgetState,
    InfiniteBranching,
    InfiniteFan,
    OutEdge,
    RunPrefix,
    StateId,
    StateKind,
)

Num = Union[Fraction, int, float]


class PayoffKind(enum.Enum):
    POINT = "point"
    MEAN = "mean"
    TOTAL = "total"


@dataclass(frozen=True)
class MonitorState:
    """Step count, running total, last reward; mean derived as total/n."""

    n: int = 0
    total: Fraction = Fraction(0)
    last: Optional[Fraction] = None

    @property
    def mean(self) -> Fraction:
        if self.n == 0:
            raise ZeroDivisionError("mean undefined before the first step")
        return self.total / self.n

    def current(self, kind: PayoffKind) -> Fraction:
        if kind is PayoffKind.POINT:
            if self.last is None:
                raise ZeroDivisionError("point payoff undefined at n=0")
            return self.last
        if kind is PayoffKind.MEAN:
            return self.mean
        return self.total


def observe(m: MonitorState, reward: Num) -> MonitorState:
    r = Fraction(reward)
    return MonitorState(n=m.n + 1, total=m.total + r, last=r)


class VerdictKind(enum.Enum):
    CERT_WIN = "win"
    CERT_LOSE = "lose"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    reason: str = ""

    @property
    def decided(self) -> bool:
        return self.kind is not VerdictKind.UNKNOWN

    def serialize(self) -> str:
        return f"{self.kind.value}:{self.reason}" if self.reason else self.kind.value


CERT_WIN = lambda reason: Verdict(VerdictKind.CERT_WIN, reason)  # noqa: E731
CERT_LOSE = lambda reason: Verdict(VerdictKind.CERT_LOSE, reason)  # noqa: E731
UNKNOWN = Verdict(VerdictKind.UNKNOWN)


@dataclass(frozen=True)
class StructuralFacts:
    """Absorbing win/lose regions, declared by gadget builders.

    Inference of such regions is undecidable in general, so they are
    inputs, not derived data.
    """

    is_losing_sink: Callable[[StateId], bool] = lambda s: False
    is_winning_region: Callable[[StateId], bool] = lambda s: False

    @staticmethod
    def none() -> "StructuralFacts":
        return StructuralFacts()

    @staticmethod
    def bottom_only() -> "StructuralFacts":
        return StructuralFacts(is_losing_sink=lambda s: s == BOTTOM)


def verdict(
    facts: StructuralFacts, state: StateId, m: MonitorState, kind: PayoffKind
) -> Verdict:
    """Monotone three-valued verdict for the given liminf objective.

    Absorption in the losing sink falsifies all three objectives (each
    step appends reward -1); absorption in a zero-reward winning region
    satisfies point and mean always, and total only when the running
    total is already >= 0.
    """
    if facts.is_losing_sink(state):
        return CERT_LOSE("losing-sink")
    if facts.is_winning_region(state):
        if kind is PayoffKind.TOTAL and m.total < 0:
            return UNKNOWN
        return CERT_WIN("absorbing-safe")
    return UNKNOWN


@dataclass(frozen=True)
class SafetyLevelSpec:
    """Level i with bound k_i: after step k_i no point reward < -2^-i."""

    level: int
    k: int

    @property
    def threshold(self) -> Fraction:
        return -Fraction(1, 2 ** self.level)


def safety_level_holds(run: RunPrefix, spec: SafetyLevelSpec) -> Optional[bool]:
    """True/False once the prefix covers step k_i; None before that."""
    if len(run) < spec.k:
        return None
    thr = spec.threshold
    for e in run.edges[spec.k:]:
        if Fraction(e.reward) < thr:
            return False
    return True


def bubble(mdp: CountableMdp, s0: StateId, n: int) -> Set[StateId]:
    """Exact BFS ball of radius n; requires declared finite branching."""
    if not mdp.finitely_branching:
        raise InfiniteBranching("bubble needs a finitely branching MDP")
    seen = {s0}
    frontier = [s0]
    for _ in range(n):
        nxt = []
        for s in frontier:
            for e in mdp.edges(s):
                if e.target not in seen:
                    seen.add(e.target)
                    nxt.append(e.target)
        frontier = nxt
        if not frontier:
            break
    return seen


def depth_map(mdp: CountableMdp, s0: StateId, radius: int) -> Dict[StateId, int]:
    """BFS depth of every state within the given radius."""
    if not mdp.finitely_branching:
        raise InfiniteBranching("depth map needs a finitely branching MDP")
    depth = {s0: 0}
    frontier = deque([s0])
    while frontier:
        s = frontier.popleft()
        d = depth[s]
        if d >= radius:
            continue
        for e in mdp.edges(s):
            if e.target not in depth:
                depth[e.target] = d + 1
                frontier.append(e.target)
    return depth


def transience_reward_structure(mdp: CountableMdp, s0: StateId) -> CountableMdp:
    """Replace rewards by -1/n(t) with n(t) = BFS depth of the source + 1.

    On the result a run revisiting any state sees some fixed negative
    reward infinitely often, so the point-payoff liminf objective
    coincides with never revisiting states.
    """
    if not mdp.finitely_branching:
        raise InfiniteBranching("transience rewards need finite branching")

    depth_cache: Dict[StateId, int] = {s0: 0}
    frontier_state = {"frontier": deque([s0])}

    def depth_of(s: StateId) -> int:
        # expand the BFS lazily until s is reached
        frontier = frontier_state["frontier"]
        while s not in depth_cache:
            if not frontier:
                raise KeyError(f"state {s!r} unreachable from {s0!r}")
            cur = frontier.popleft()
            for e in mdp.edges(cur):
                if e.target not in depth_cache:
                    depth_cache[e.target] = depth_cache[cur] + 1
                    frontier.append(e.target)
        return depth_cache[s]

    def successors_of(s: StateId):
        r = Fraction(-1, depth_of(s) + 1)
        return [OutEdge(e.target, r, e.probability) for e in mdp.edges(s)]

    return CountableMdp(
        initial=s0,
        kind_of=mdp.kind_of,
        successors_of=successors_of,
        finitely_branching=True,
    )
