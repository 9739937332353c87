"""Construction of the gadget MDP families and their canonical strategies.

The central family is a chain of blocks.  Block n opens with a random
branch choice (probabilities delta_i(n)), rewards the chosen branch i
with +i*m_n, then offers the controller the mirrored choice: playing j
costs -j*m_n on the exit and risks the losing sink with probability
epsilon_j(n) (the top branch is risk-free).  Matching the random branch
is the only play that keeps block totals at zero; overshooting (j > i)
buries the mean payoff under the m_n scale, and every mismatch class
accumulates fatal risk by the schedule hypotheses.

A parallel skip track allows jumping over any prefix of blocks at -1
per skipped block, reimbursed on re-entry, preserving path length: the
step counter stays implicit in the state.  The reward-annotated variant
("reward") stretches branch i to n*m_n^i zero-reward steps instead, so
the running total, not the depth, is state-determined.  The restart
variant replaces the losing sink with a penalized, reimbursed restart
into a fresh row of the chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from .mdp import (
    BOTTOM,
    CountableMdp,
    GadgetState,
    InfiniteFan,
    OutEdge,
    StateId,
    StateKind,
    UnknownState,
)
from .monitors import StructuralFacts
from .schedule import (
    AcceleratedSchedule,
    FaithfulSchedule,
    RationalizedSchedule,
    Schedule,
    skip_index,
)
from .strategies import Strategy, StrategyClass

Rat = Union[int, Fraction]


class VariantMismatch(ValueError):
    pass


class ScheduleRange(ValueError):
    pass


STEP_IMPLICIT = "step"
REWARD_IMPLICIT = "reward"


@dataclass(frozen=True)
class ChainOptions:
    variant: str = STEP_IMPLICIT
    restart: bool = False
    binary: bool = False
    bounded: bool = False

    def __post_init__(self):
        if self.variant not in (STEP_IMPLICIT, REWARD_IMPLICIT):
            raise VariantMismatch(f"unknown variant {self.variant!r}")
        if self.bounded and (self.restart or self.variant != STEP_IMPLICIT):
            raise VariantMismatch(
                "unit-reward splitting is built for plain step-implicit "
                "chains; depth-consistent splitting of restart penalties "
                "is not pinned down by the construction"
            )
        if self.binary and self.variant != STEP_IMPLICIT:
            raise VariantMismatch("binary trees apply to the step-implicit fans")


class GadgetChain:
    """A constructed chain with its schedule, flags, and declared facts."""

    def __init__(self, schedule: Schedule, options: ChainOptions):
        if not getattr(schedule, "exact", False) and not isinstance(
            schedule, (FaithfulSchedule,)
        ):
            raise ScheduleRange("schedule must be faithful or exact-rational")
        if options.variant == REWARD_IMPLICIT and schedule.variant != "B":
            raise VariantMismatch("reward-implicit chains need a B-variant schedule")
        if options.variant == STEP_IMPLICIT and schedule.variant != "A":
            raise VariantMismatch("step-implicit chains need an A-variant schedule")
        self.schedule = schedule
        self.options = options
        self.n_star = schedule.n_star
        self.mdp = CountableMdp(
            initial=GadgetState(self.n_star, "gate"),
            kind_of=self._kind_of,
            successors_of=self._successors_of,
            finitely_branching=True,
        )
        self.facts = StructuralFacts(is_losing_sink=lambda s: s == BOTTOM)

    # -- shared block quantities

    def k(self, n: int) -> int:
        return self.schedule.k_of(n)

    def m(self, n: int) -> int:
        return self.schedule.m(n)

    def deficit(self, n: int) -> int:
        return n - self.n_star

    def tree_depth(self, n: int) -> int:
        return max(1, math.ceil(math.log2(self.k(n) + 1)))

    def unit_len(self, n: int) -> int:
        """Length of one unit-split reward segment in the bounded variant."""
        return self.k(n) * self.m(n)

    def enter_len(self, n: int) -> int:
        """Edges on the re-entry path from the gate into the block."""
        return max(self.deficit(n), 1) if self.options.bounded else 1

    def block_len(self, n: int) -> int:
        """Edges from s(n) to s(n+1) through the block (step variant)."""
        if self.options.bounded:
            return 2 + 2 * self.unit_len(n) + self.enter_len(n + 1)
        if self.options.binary:
            return 2 * self.tree_depth(n) + 2
        return 4

    def column_len(self, n: int) -> int:
        """Edges from gate(n) to gate(n+1) along the skip track."""
        if self.options.bounded:
            return self.enter_len(n) + 2 + 2 * self.unit_len(n)
        return self.block_len(n)

    def gate_depth(self, n: int) -> int:
        d = 0
        for b in range(self.n_star, n):
            d += self.column_len(b)
        return d

    def penalty(self, n: int) -> int:
        """Restart penalty leaving block n (dwarfs any running total)."""
        return self.m(n + 2)

    # -- generators

    def _kind_of(self, s: StateId) -> StateKind:
        if s == BOTTOM:
            return StateKind.CONTROLLED
        if not isinstance(s, GadgetState):
            raise UnknownState(f"not a chain state: {s!r}")
        if s.role in ("s", "down", "cp"):
            return StateKind.RANDOM
        return StateKind.CONTROLLED

    def _successors_of(self, s: StateId) -> Sequence[OutEdge]:
        if s == BOTTOM:
            return [OutEdge(BOTTOM, -1)]
        if not isinstance(s, GadgetState):
            raise UnknownState(f"not a chain state: {s!r}")
        if self.options.variant == STEP_IMPLICIT:
            return self._step_successors(s)
        return self._reward_successors(s)

    # step-implicit roles: gate, pad, ue (unit enter), s, st (s-tree),
    # up, ub (unit up path), c, ct (c-tree), down, db (unit exit path),
    # rst / rpad (restart path)

    def _step_successors(self, s: GadgetState) -> List[OutEdge]:
        n, role, row = s.n, s.role, s.row
        k, m = self.k(n), self.m(n)
        if role == "gate":
            if self.options.bounded and self.deficit(n) > 0:
                enter = OutEdge(GadgetState(n, "ue", -1, 0, row), 1)
            else:
                enter = OutEdge(GadgetState(n, "s", -1, 0, row), self.deficit(n))
            skip = OutEdge(GadgetState(n, "pad", -1, 0, row), -1)
            return [enter, skip]
        if role == "pad":
            last = self.column_len(n) - 2
            if s.offset < last:
                return [OutEdge(GadgetState(n, "pad", -1, s.offset + 1, row), 0)]
            return [OutEdge(GadgetState(n + 1, "gate", -1, 0, row), 0)]
        if role == "ue":
            nxt = s.offset + 1
            if nxt < self.deficit(n):
                return [OutEdge(GadgetState(n, "ue", -1, nxt, row), 1)]
            return [OutEdge(GadgetState(n, "s", -1, 0, row), 1)]
        if role == "s":
            if self.options.binary:
                return self._tree_edges(n, row, "st", 0, k, 1)
            return [
                OutEdge(
                    GadgetState(n, "up", i, 0, row),
                    0,
                    self.schedule.delta(i, n),
                )
                for i in range(k + 1)
            ]
        if role == "st":
            return self._tree_node(s, "st")
        if role == "up":
            i = s.branch
            if self.options.bounded:
                return [OutEdge(GadgetState(n, "ub", i, 0, row), 1 if i > 0 else 0)]
            return [OutEdge(GadgetState(n, "c", -1, 0, row), i * m)]
        if role == "ub":
            i, o = s.branch, s.offset
            total = self.unit_len(n)
            nxt = o + 1
            if nxt < total:
                r = 1 if nxt < i * m else 0
                return [OutEdge(GadgetState(n, "ub", i, nxt, row), r)]
            return [OutEdge(GadgetState(n, "c", -1, 0, row), 0)]
        if role == "c":
            if self.options.binary:
                return self._tree_edges(n, row, "ct", 0, k, 1)
            return [OutEdge(GadgetState(n, "down", j, 0, row), 0) for j in range(k + 1)]
        if role == "ct":
            return self._tree_node(s, "ct")
        if role == "down":
            j = s.branch
            eps = self.schedule.epsilon(j, n)
            exit_target, exit_reward = self._exit_edge(n, j, row)
            if eps == 0:
                return [OutEdge(exit_target, exit_reward, _one_minus(eps))]
            if self.options.restart:
                escape = OutEdge(
                    GadgetState(n, "rst", j, 0, row), -self.penalty(n), eps
                )
            else:
                escape = OutEdge(BOTTOM, 0, eps)
            return [
                OutEdge(exit_target, exit_reward, _one_minus(eps)),
                escape,
            ]
        if role == "db":
            j, o = s.branch, s.offset
            total = self.unit_len(n) + self.enter_len(n + 1)
            nxt = o + 1
            if nxt < total:
                r = -1 if nxt < j * m else 0
                return [OutEdge(GadgetState(n, "db", j, nxt, row), r)]
            return [OutEdge(GadgetState(n + 1, "s", -1, 0, row), 0)]
        if role == "rst":
            return [OutEdge(GadgetState(n, "rpad", s.branch, 0, row), 0)]
        if role == "rpad":
            if s.offset == 0:
                return [OutEdge(GadgetState(n, "rpad", s.branch, 1, row), 0)]
            return [
                OutEdge(GadgetState(n + 2, "gate", -1, 0, row + 1), self.penalty(n))
            ]
        raise UnknownState(f"unknown role {role!r} in {s}")

    def _exit_edge(self, n: int, j: int, row: int) -> Tuple[StateId, int]:
        m = self.m(n)
        if self.options.bounded:
            return GadgetState(n, "db", j, 0, row), -1 if j > 0 else 0
        return GadgetState(n + 1, "s", -1, 0, row), -j * m

    # binary fan trees: nodes cover branch ranges [lo, hi] at a level;
    # offset packs (level, hi - lo); single-child nodes pad odd ranges
    # so every leaf sits exactly tree_depth(n) below the fan root.

    def _tree_edges(self, n, row, role, lo, hi, level) -> List[OutEdge]:
        depth = self.tree_depth(n)
        out = []
        if lo == hi:
            return [self._tree_leaf_edge(n, row, role, lo, level, depth)]
        mid = (lo + hi) // 2
        for a, b in ((lo, mid), (mid + 1, hi)):
            if role == "st":
                p = self._range_prob(n, a, b) / self._range_prob(n, lo, hi)
            else:
                p = None
            out.append(
                OutEdge(_tree_state(n, row, role, a, b, level), 0, p)
            )
        return out

    def _tree_leaf_edge(self, n, row, role, i, level, depth) -> OutEdge:
        if level < depth:
            # pass-through padding node
            p = Fraction(1) if role == "st" else None
            return OutEdge(_tree_state(n, row, role, i, i, level), 0, p)
        target_role = "up" if role == "st" else "down"
        p = Fraction(1) if role == "st" else None
        return OutEdge(GadgetState(n, target_role, i, 0, row), 0, p)

    def _tree_node(self, s: GadgetState, role) -> List[OutEdge]:
        n, row = s.n, s.row
        level, span = divmod(s.offset, 16)
        lo, hi = s.branch, s.branch + span
        if lo == hi:
            depth = self.tree_depth(n)
            return [self._tree_leaf_edge(n, row, role, lo, level + 1, depth)]
        return self._tree_edges(n, row, role, lo, hi, level + 1)

    def _range_prob(self, n: int, lo: int, hi: int) -> Fraction:
        return sum(
            (self.schedule.delta(i, n) for i in range(lo, hi + 1)), Fraction(0)
        )

    # reward-implicit roles: gate, pad, s, rp (zero-reward branch path),
    # c, cp (post-choice random), rb (reimbursed pre-sink), rst / rpad

    def _reward_successors(self, s: GadgetState) -> List[OutEdge]:
        n, role, row = s.n, s.role, s.row
        k = self.k(n)
        m = self.m(n)
        if role == "gate":
            return [
                OutEdge(GadgetState(n, "s", -1, 0, row), self.deficit(n)),
                OutEdge(GadgetState(n, "pad", -1, 0, row), -1),
            ]
        if role == "pad":
            if s.offset < 2:
                return [OutEdge(GadgetState(n, "pad", -1, s.offset + 1, row), 0)]
            return [OutEdge(GadgetState(n + 1, "gate", -1, 0, row), 0)]
        if role == "s":
            return [
                OutEdge(
                    GadgetState(n, "rp", i, 0, row), 0, self.schedule.delta(i, n)
                )
                for i in range(k + 1)
            ]
        if role == "rp":
            i, o = s.branch, s.offset
            length = n * m ** i
            if o + 1 < length:
                return [OutEdge(GadgetState(n, "rp", i, o + 1, row), 0)]
            return [OutEdge(GadgetState(n, "c", -1, 0, row), 0)]
        if role == "c":
            return [
                OutEdge(GadgetState(n, "cp", j, 0, row), -(m ** j))
                for j in range(k + 1)
            ]
        if role == "cp":
            j = s.branch
            eps = self.schedule.epsilon(j, n)
            good = OutEdge(
                GadgetState(n + 1, "s", -1, 0, row), m ** j, _one_minus(eps)
            )
            if eps == 0:
                return [good]
            if self.options.restart:
                # reimburse the pending -m^j, then the penalty
                escape = OutEdge(
                    GadgetState(n, "rst", j, 0, row),
                    m ** j - self.penalty(n),
                    eps,
                )
            else:
                escape = OutEdge(GadgetState(n, "rb", j, 0, row), m ** j, eps)
            return [good, escape]
        if role == "rb":
            return [OutEdge(BOTTOM, 0)]
        if role == "rst":
            return [OutEdge(GadgetState(n, "rpad", s.branch, 0, row), 0)]
        if role == "rpad":
            if s.offset == 0:
                return [OutEdge(GadgetState(n, "rpad", s.branch, 1, row), 0)]
            return [
                OutEdge(GadgetState(n + 2, "gate", -1, 0, row + 1), self.penalty(n))
            ]
        raise UnknownState(f"unknown role {role!r} in {s}")

    # -- audits / metadata

    def block_states(self, n: int, row: int = 0) -> List[StateId]:
        """All states from s(n) up to (not including) s(n+1)."""
        from .monitors import depth_map

        start = GadgetState(n, "s", -1, 0, row)
        horizon = self.block_len(n) if self.options.variant == STEP_IMPLICIT else None
        if horizon is None:
            k, m = self.k(n), self.m(n)
            horizon = n * m ** k + 4
        dm = depth_map(self.mdp_from(start), start, horizon)
        out = []
        for st, d in dm.items():
            if st == BOTTOM:
                continue
            if isinstance(st, GadgetState) and st.n == n and st.role not in ("gate", "pad"):
                out.append(st)
        return out

    def mdp_from(self, start: StateId) -> CountableMdp:
        return CountableMdp(
            initial=start,
            kind_of=self._kind_of,
            successors_of=self._successors_of,
            finitely_branching=True,
        )

    def manifest(self) -> dict:
        return {
            "kind": "gadget-chain",
            "variant": self.options.variant,
            "restart": self.options.restart,
            "binary": self.options.binary,
            "bounded": self.options.bounded,
            "schedule": self.schedule.manifest(),
        }


def _tree_state(n, row, role, lo, hi, level) -> GadgetState:
    return GadgetState(n, role, lo, level * 16 + (hi - lo), row)


def _one_minus(p):
    if isinstance(p, (int, Fraction)):
        return 1 - Fraction(p)
    return 1 - p


# ------------------------------------------------------------------
# Builders


def build_chain(schedule: Schedule, options: Optional[ChainOptions] = None) -> GadgetChain:
    return GadgetChain(schedule, options or ChainOptions())


def build_block(schedule: Schedule, n: int) -> GadgetChain:
    """The chain restricted conceptually to one block; returned as the
    full chain (blocks are generated lazily, so nothing extra exists)
    with n validated against the schedule range."""
    if n < schedule.n_star:
        raise ScheduleRange(f"block {n} below first index {schedule.n_star}")
    variant = STEP_IMPLICIT if schedule.variant == "A" else REWARD_IMPLICIT
    return GadgetChain(schedule, ChainOptions(variant=variant))


def build_reward_implicit(schedule: Schedule) -> GadgetChain:
    return GadgetChain(schedule, ChainOptions(variant=REWARD_IMPLICIT))


def build_restart(schedule: Schedule, variant: str = STEP_IMPLICIT) -> GadgetChain:
    return GadgetChain(schedule, ChainOptions(variant=variant, restart=True))


def to_binary_branching(chain: GadgetChain) -> GadgetChain:
    if chain.options.variant != STEP_IMPLICIT:
        raise VariantMismatch("binary strengthening applies to step-implicit chains")
    opts = ChainOptions(
        variant=chain.options.variant,
        restart=chain.options.restart,
        binary=True,
        bounded=chain.options.bounded,
    )
    return GadgetChain(chain.schedule, opts)


def bound_rewards(chain: GadgetChain) -> GadgetChain:
    opts = ChainOptions(
        variant=chain.options.variant,
        restart=chain.options.restart,
        binary=chain.options.binary,
        bounded=True,
    )
    return GadgetChain(chain.schedule, opts)


class _SnappedSchedule:
    """Exact schedule with every probability nudged into (p, p + 2^-n)."""

    family = "rationalized"
    exact = True

    def __init__(self, base: Schedule, name: Optional[str] = None):
        self.base = base
        self.variant = base.variant
        self.name = name or f"{base.name}-rationalized"
        self.n_star = base.n_star
        self.kmax = base.kmax
        self._m_cache = getattr(base, "_m_cache", {})

    def k_of(self, n: int) -> int:
        return self.base.k_of(n)

    def m(self, n: int) -> int:
        return self.base.m(n)

    def delta(self, i: int, n: int) -> Fraction:
        k = self.k_of(n)
        if i == k:
            return 1 - sum(self.delta(j, n) for j in range(k))
        return self.base.delta(i, n) + Fraction(1, 2 ** (n + 2))

    def epsilon(self, i: int, n: int) -> Fraction:
        if i == self.k_of(n):
            return Fraction(0)
        return self.base.epsilon(i, n) + Fraction(1, 2 ** (n + 2))

    def loss(self, n: int) -> Fraction:
        return sum(
            (self.delta(i, n) * self.epsilon(i, n) for i in range(self.k_of(n))),
            Fraction(0),
        )

    def tail_sum_enclosure(self, M: int):
        lo, hi = self.base.tail_sum_enclosure(M)
        return lo, hi + Fraction(8, 2 ** M)

    def manifest(self) -> dict:
        return {"family": "rationalized", "base": self.base.manifest(), "name": self.name}


def rationalize(chain: GadgetChain) -> GadgetChain:
    """Replace probabilities by close rationals in (p, p + 2^-n).

    Faithful schedules get the interval-certified snap; exact schedules
    get a plain dyadic nudge (used to audit perturbation bounds).
    """
    if isinstance(chain.schedule, FaithfulSchedule):
        sched: Schedule = RationalizedSchedule(chain.schedule)
    else:
        sched = _SnappedSchedule(chain.schedule)
    return GadgetChain(sched, chain.options)


# ------------------------------------------------------------------
# Stand-alone gadget MDPs


def build_infinite_branching() -> Tuple[CountableMdp, StructuralFacts, dict]:
    """Infinitely branching cycle gadget.

    A controlled hub s fans out to r_i (i >= 1, all rewards 0); r_i
    falls to the resetting state t with probability 2^-i (reward -1,
    the only negative edge) and returns to s otherwise; t returns to s
    with reward +1.  Visiting t finitely often is exactly the point- and
    total-payoff objective.
    """
    S, T = "s", "t"

    def kind_of(st):
        if st == S or st == T:
            return StateKind.CONTROLLED
        return StateKind.RANDOM

    def successors_of(st):
        if st == S:
            return InfiniteFan(
                edge_at=lambda idx: OutEdge(("r", idx + 1), 0),
                tail_mass=None,
            )
        if st == T:
            return [OutEdge(S, 1)]
        _, i = st
        p = Fraction(1, 2 ** i)
        return [OutEdge(T, -1, p), OutEdge(S, 0, 1 - p)]

    mdp = CountableMdp(S, kind_of, successors_of, finitely_branching=False)
    meta = {"cobuchi_target": T, "hub": S}
    return mdp, StructuralFacts.none(), meta


def build_growing_memory() -> Tuple[CountableMdp, StructuralFacts, dict]:
    """Unbounded-memory example: hub s with a free self-loop and +1
    fan to r_i, each r_i dropping to the losing sink with 2^-i."""
    S = "s"

    def kind_of(st):
        if st == S:
            return StateKind.CONTROLLED
        if st == BOTTOM:
            return StateKind.CONTROLLED
        return StateKind.RANDOM

    def successors_of(st):
        if st == S:
            return InfiniteFan(
                edge_at=lambda idx: OutEdge(S, 0)
                if idx == 0
                else OutEdge(("r", idx), 1),
                tail_mass=None,
            )
        if st == BOTTOM:
            return [OutEdge(BOTTOM, -1)]
        _, i = st
        p = Fraction(1, 2 ** i)
        return [OutEdge(BOTTOM, 0, p), OutEdge(S, 0, 1 - p)]

    mdp = CountableMdp(S, kind_of, successors_of, finitely_branching=False)
    meta = {"hub": S}
    return mdp, StructuralFacts(is_losing_sink=lambda s: s == BOTTOM), meta


def build_puterman() -> Tuple[CountableMdp, Strategy, dict]:
    """Deterministic chain with loop reward -1/k at station k and -1 on
    each advance, plus the companion loop-count strategy."""

    def kind_of(st):
        return StateKind.CONTROLLED

    def successors_of(st):
        _, k = st
        return [
            OutEdge(("p", k), Fraction(-1, k)),
            OutEdge(("p", k + 1), -1),
        ]

    mdp = CountableMdp(("p", 1), kind_of, successors_of, finitely_branching=True)

    def rule(state, step, total, edges):
        _, k = state
        start = puterman_station_entry_step(k)
        return 0 if step - start < puterman_loop_count(k) else 1

    strategy = Strategy(StrategyClass.MARKOV, rule=rule, name="loop-then-advance")
    return mdp, strategy, {"loop_count": puterman_loop_count}


_PUTERMAN_CACHE: Dict[int, int] = {}


def puterman_loop_count(k: int) -> int:
    """ceil(exp(exp(k))), certified via interval ceiling."""
    if k not in _PUTERMAN_CACHE:
        from mpmath import iv

        from .bigexpr import ceil_certified
        from .intervals import iv_from_rat, with_prec

        digits = int(math.exp(k) / math.log(10)) + 20
        with with_prec(int(digits * 3.33) + 60):
            enc = iv.exp(iv.exp(iv_from_rat(k)))
            _PUTERMAN_CACHE[k] = ceil_certified(enc)
    return _PUTERMAN_CACHE[k]


def puterman_station_entry_step(k: int) -> int:
    """Step count on arrival at station k under the companion strategy."""
    return sum(puterman_loop_count(j) + 1 for j in range(1, k))


def puterman_trajectory(k_max: int) -> List[dict]:
    """Closed-form per-station summary of the companion strategy's run.

    For each station k: the running mean right after arriving (the
    lowest mean of the looping phase, since loop rewards -1/k pull the
    mean up toward -1/k from below) and right after the final loop.
    All values exact.
    """
    out = []
    total = Fraction(0)
    steps = 0
    for k in range(1, k_max + 1):
        entry_mean = total / steps if steps else None
        loops = puterman_loop_count(k)
        total += Fraction(-1, k) * loops
        steps += loops
        loop_exit_mean = total / steps
        total += -1
        steps += 1
        out.append(
            {
                "station": k,
                "loops": loops,
                "entry_mean": entry_mean,
                "loop_exit_mean": loop_exit_mean,
                "post_advance_mean": total / steps,
            }
        )
    return out


def puterman_simulated_trajectory(k_max: int) -> List[dict]:
    """Step-by-step oracle for small k; must equal the closed form."""
    mdp, strategy, _ = build_puterman()
    from .mdp import RunPrefix, extend_run
    from .strategies import act as strat_act

    run = RunPrefix.start(("p", 1))
    out = []
    total = Fraction(0)
    while True:
        _, k = run.last
        if k > k_max:
            break
        dist = strat_act(strategy, mdp, run)
        (choice,) = [i for i, p in dist.items() if p == 1]
        extend_run(mdp, run, choice=choice)
        total += Fraction(run.edges[-1].reward)
        if choice == 1:
            out.append(
                {"station": k, "post_advance_mean": total / len(run)}
            )
    return out


# ------------------------------------------------------------------
# Canonical strategies on chains


@dataclass(frozen=True)
class BlockPlan:
    """Block-level behaviour of the canonical chain strategies."""

    kind: str  # "mimic" | "skip-mimic"
    skip_until: int  # first block entered; earlier gates skip


def mimic(chain: GadgetChain) -> Strategy:
    """Always match the random branch; enters every block.

    On step-implicit chains the branch is recoverable from the running
    total (the block residue is i*m_n and all other contributions stay
    below m_n/2), so this is a reward-counter strategy.  On
    reward-implicit chains the branch is recoverable from the step
    count via the per-branch path-length bands, a step-counter
    strategy; blocks whose bands are too narrow to separate fall back
    to the risk-free top branch.
    """
    plan = BlockPlan("mimic", chain.n_star)
    if chain.options.variant == STEP_IMPLICIT:
        strat = Strategy(
            StrategyClass.RC,
            rule=_step_mimic_rule(chain, plan),
            name="mimic",
        )
    else:
        strat = Strategy(
            StrategyClass.MARKOV,
            rule=_reward_mimic_rule(chain, plan),
            name="mimic",
        )
    strat.meta.update(block_plan=plan, chain=chain)
    return strat


def skip_then_mimic(chain: GadgetChain, eps: Rat) -> Strategy:
    """Skip to the certified tail index for eps, then mimic."""
    n_eps = skip_index(chain.schedule, Fraction(eps))
    plan = BlockPlan("skip-mimic", n_eps)
    if chain.options.variant == STEP_IMPLICIT:
        strat = Strategy(
            StrategyClass.RC,
            rule=_step_mimic_rule(chain, plan),
            name=f"skip-{n_eps}-mimic",
        )
    else:
        strat = Strategy(
            StrategyClass.MARKOV,
            rule=_reward_mimic_rule(chain, plan),
            name=f"skip-{n_eps}-mimic",
        )
    strat.meta.update(block_plan=plan, chain=chain)
    return strat


def concat_half(chain: GadgetChain) -> Strategy:
    """Play skip_then_mimic(1/2) afresh in every restart row."""
    if not chain.options.restart:
        raise VariantMismatch("concat-half needs a restart chain")
    return skip_then_mimic(chain, Fraction(1, 2))


def _step_mimic_rule(chain: GadgetChain, plan: BlockPlan):
    def rule(state: GadgetState, step: int, total: Fraction, edges):
        if state == BOTTOM:
            return 0
        role = state.role
        if role == "gate":
            return 0 if state.n >= plan.skip_until else 1
        if role == "c":
            m = chain.m(state.n)
            i = int(total // m)
            return max(0, min(i, chain.k(state.n)))
        if role == "ct":
            # descend the tree toward the decoded branch
            m = chain.m(state.n)
            i = max(0, min(int(total // m), chain.k(state.n)))
            return _tree_descend(state, i)
        return 0

    return rule


def _reward_mimic_rule(chain: GadgetChain, plan: BlockPlan):
    def rule(state: GadgetState, step: int, total: Fraction, edges):
        if state == BOTTOM:
            return 0
        role = state.role
        if role == "gate":
            return 0 if state.n >= plan.skip_until else 1
        if role == "c":
            return _decode_branch_by_depth(chain, state.n, step)
        return 0

    return rule


def _tree_descend(state: GadgetState, target: int) -> int:
    level, span = divmod(state.offset, 16)
    lo, hi = state.branch, state.branch + span
    if lo == hi:
        return 0
    mid = (lo + hi) // 2
    return 0 if target <= mid else 1


def reward_band(chain: GadgetChain, n: int, i: int) -> Tuple[int, int]:
    """[min, max] step count at c(n) after arriving via branch i.

    Minimal history skips every earlier column (4 steps each); maximal
    history enters every block and draws its top branch; any mixed
    prefix lands in between.  Restart detours are not accounted for, so
    the decode falls back to the risk-free top once rows restart.
    """
    branch_path = n * chain.m(n) ** i + 1  # s(n) -> c(n)
    all_skip = 4 * (n - chain.n_star) + 1 + branch_path
    all_enter = 1 + branch_path
    for b in range(chain.n_star, n):
        all_enter += b * chain.m(b) ** chain.k(b) + 3
    return min(all_skip, all_enter), max(all_skip, all_enter)


def _decode_branch_by_depth(chain: GadgetChain, n: int, step: int) -> int:
    """Play the unique branch whose band contains the step count; where
    bands collide (degenerate tiny-m blocks) fall back to the risk-free
    top branch, whose mirrored reward cancels whatever was gained."""
    k = chain.k(n)
    candidates = [
        i
        for i in range(k + 1)
        if reward_band(chain, n, i)[0] <= step <= reward_band(chain, n, i)[1]
    ]
    if len(candidates) == 1:
        return candidates[0]
    return k


def bands_separated(chain: GadgetChain, n: int) -> bool:
    """True when the step count at c(n) determines the branch."""
    k = chain.k(n)
    bands = [reward_band(chain, n, i) for i in range(k + 1)]
    for a in range(k + 1):
        for b in range(a + 1, k + 1):
            if bands[a][1] >= bands[b][0] and bands[b][1] >= bands[a][0]:
                return False
    return True
