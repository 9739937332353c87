"""Strategies as countable memory machines, plus counter-based classes.

A memory machine is a kernel tau: (mode, state) -> distribution over
(mode', successor edge).  At controlled states the edge marginal is the
action; at random states the edge marginal must equal the MDP's own
distribution, so the machine only chooses how to update memory.

Counter classes (step counter, reward counter, both) are closed-form
rules over (state, counters): the counters update deterministically and
are not under the player's control, so materializing countable machines
for them would add nothing.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Hashable, List, Mapping, Optional, Sequence, Tuple, Union

from .mdp import BadChoice, CountableMdp, InfiniteFan, OutEdge, RunPrefix, StateId

Mode = Hashable
EdgeDist = Dict[int, Fraction]  # edge index -> probability
JointDist = Dict[Tuple[Mode, int], Fraction]  # (mode', edge index) -> prob


class NotControlled(ValueError):
    pass


class NotFiniteMemory(ValueError):
    pass


class ClassTooRich(ValueError):
    """Pull-back requested for a strategy class the reduction lemmas
    do not cover."""


class StrategyClass(enum.Enum):
    MD = "md"
    FR = "fr"
    MARKOV = "sc"  # step counter
    RC = "rc"  # reward counter
    SC_RC = "sc+rc"
    K_BIT_MARKOV = "kbit-sc"
    HD = "hd"


@dataclass(frozen=True)
class MemoryMachine:
    """Finite or countable mode set with a joint update/act kernel.

    ``kernel(mode, state, edges)`` returns a distribution over
    (next mode, edge index).  Mode sets beyond ``modes`` (countable
    machines) may be declared with modes=None and a size_class label.
    """

    initial: Mode
    kernel: Callable[[Mode, StateId, Sequence[OutEdge]], JointDist]
    modes: Optional[Tuple[Mode, ...]] = None
    size_class: str = "finite"

    @property
    def mode_count(self) -> Optional[int]:
        return None if self.modes is None else len(self.modes)


def machine_from_parts(
    modes: Sequence[Mode],
    initial: Mode,
    act: Callable[[Mode, StateId, Sequence[OutEdge]], EdgeDist],
    update: Callable[[Mode, StateId, int, Sequence[OutEdge]], Dict[Mode, Fraction]],
) -> MemoryMachine:
    """Compose an action rule and a (possibly randomized) update rule.

    Random states take the MDP's own edge distribution; the update sees
    the realized edge, so the successor marginal is exact by
    construction.
    """

    def kernel(mode: Mode, state: StateId, edges: Sequence[OutEdge]) -> JointDist:
        joint: JointDist = {}
        random_state = edges and edges[0].probability is not None
        if random_state:
            base = {i: Fraction(e.probability) for i, e in enumerate(edges)}
        else:
            base = act(mode, state, edges)
        for i, p in base.items():
            if p == 0:
                continue
            for m2, q in update(mode, state, i, edges).items():
                if q == 0:
                    continue
                joint[(m2, i)] = joint.get((m2, i), Fraction(0)) + p * Fraction(q)
        return joint

    return MemoryMachine(initial=initial, kernel=kernel, modes=tuple(modes))


CounterRule = Callable[[StateId, int, Fraction, Sequence[OutEdge]], Union[int, EdgeDist]]


@dataclass(frozen=True)
class Strategy:
    """A decision rule with a declared class tag.

    Exactly one of ``machine`` (MD/FR/HD realizations) or ``rule``
    (counter classes; signature (state, step, total, edges)) is set.
    ``chain_machine`` carries the block-structured view of FR machines
    built for gadget chains, used by the exact block DP.
    """

    cls: StrategyClass
    machine: Optional[MemoryMachine] = None
    rule: Optional[CounterRule] = None
    fr_modes: int = 0
    name: str = ""
    chain_machine: Optional["ChainMachine"] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if (self.machine is None) == (self.rule is None):
            raise ValueError("strategy needs exactly one of machine or rule")


def _dirac(i: int) -> EdgeDist:
    return {i: Fraction(1)}


def _coerce_dist(out: Union[int, EdgeDist]) -> EdgeDist:
    return _dirac(out) if isinstance(out, int) else out


def make_md(choice: Callable[[StateId, Sequence[OutEdge]], int]) -> Strategy:
    modes = ("*",)

    def act(mode, state, edges):
        return _dirac(choice(state, edges))

    def update(mode, state, i, edges):
        return {"*": Fraction(1)}

    return Strategy(StrategyClass.MD, machine=machine_from_parts(modes, "*", act, update), fr_modes=1)


def make_markov(rule: Callable[[StateId, int], Union[int, EdgeDist]]) -> Strategy:
    return Strategy(
        StrategyClass.MARKOV,
        rule=lambda s, step, total, edges: rule(s, step),
    )


def make_reward_counter(rule: Callable[[StateId, Fraction], Union[int, EdgeDist]]) -> Strategy:
    return Strategy(
        StrategyClass.RC,
        rule=lambda s, step, total, edges: rule(s, total),
    )


def make_sc_rc(rule: Callable[[StateId, int, Fraction], Union[int, EdgeDist]]) -> Strategy:
    return Strategy(
        StrategyClass.SC_RC,
        rule=lambda s, step, total, edges: rule(s, step, total),
    )


def make_fr(machine: MemoryMachine, name: str = "") -> Strategy:
    if machine.modes is None:
        raise NotFiniteMemory("FR strategies need an explicit finite mode set")
    return Strategy(StrategyClass.FR, machine=machine, fr_modes=len(machine.modes), name=name)


# ------------------------------------------------------------------
# Acting


def act(strategy: Strategy, mdp: CountableMdp, run: RunPrefix) -> EdgeDist:
    """Distribution over successor edge indices at the run's last state.

    Machine strategies are evaluated by exact forward filtering of the
    mode distribution along the partial run, which realizes the induced
    strategy of the kernel even under randomized memory updates.
    """
    s = run.last
    if mdp.is_random(s):
        raise NotControlled(f"act called at random state {s!r}")
    edges = mdp.edges(s)
    if strategy.rule is not None:
        total = sum((Fraction(e.reward) for e in run.edges), Fraction(0))
        out = _coerce_dist(strategy.rule(s, len(run), total, edges))
        _check_support(out, len(edges))
        return out
    mode_dist = filter_modes(strategy.machine, mdp, run)
    out: EdgeDist = {}
    for m, w in mode_dist.items():
        joint = strategy.machine.kernel(m, s, edges)
        for (m2, i), p in joint.items():
            out[i] = out.get(i, Fraction(0)) + w * p
    _check_support(out, len(edges))
    return out


def _check_support(dist: EdgeDist, n_edges: int) -> None:
    for i, p in dist.items():
        if p < 0 or not 0 <= i < n_edges:
            raise BadChoice(f"action assigns probability to non-successor {i}")
    if sum(dist.values()) != 1:
        raise BadChoice("action distribution does not sum to 1")


def filter_modes(
    machine: MemoryMachine, mdp: CountableMdp, run: RunPrefix
) -> Dict[Mode, Fraction]:
    """Exact conditional mode distribution given the observed run."""
    dist: Dict[Mode, Fraction] = {machine.initial: Fraction(1)}
    for step in range(len(run)):
        s = run.state(step)
        edges = mdp.edges(s)
        taken = _edge_index(edges, run.edge(step))
        nxt: Dict[Mode, Fraction] = {}
        for m, w in dist.items():
            joint = machine.kernel(m, s, edges)
            for (m2, i), p in joint.items():
                if i == taken:
                    nxt[m2] = nxt.get(m2, Fraction(0)) + w * p
        total = sum(nxt.values())
        if total == 0:
            raise BadChoice("run inconsistent with the machine kernel")
        dist = {m: w / total for m, w in nxt.items()}
    return dist


def _edge_index(edges: Sequence[OutEdge], edge: OutEdge) -> int:
    for i, e in enumerate(edges):
        if e == edge:
            return i
    raise BadChoice(f"edge {edge} not among canonical successors")


# ------------------------------------------------------------------
# Induced chain (exact product construction for finite-memory classes)


def induced_chain(
    mdp: CountableMdp,
    fragment: Sequence[StateId],
    strategy: Strategy,
    absorbing: Sequence[StateId] = (),
) -> Dict[Tuple[Mode, StateId], Dict[Tuple[Mode, StateId], Fraction]]:
    """Exact Markov chain over (mode, state) on a finite fragment.

    Transitions leaving the fragment land on their target with the mode
    kept; ``absorbing`` states get an implicit self-loop.  Requires an
    MD or FR strategy.
    """
    if strategy.cls not in (StrategyClass.MD, StrategyClass.FR):
        raise NotFiniteMemory(f"induced chain needs MD or FR, got {strategy.cls}")
    machine = strategy.machine
    frag = set(fragment)
    absorb = set(absorbing)
    chain: Dict[Tuple[Mode, StateId], Dict[Tuple[Mode, StateId], Fraction]] = {}
    for s in fragment:
        edges = mdp.edges(s) if s not in absorb else []
        for m in machine.modes:
            key = (m, s)
            if s in absorb:
                chain[key] = {key: Fraction(1)}
                continue
            row: Dict[Tuple[Mode, StateId], Fraction] = {}
            joint = machine.kernel(m, s, edges)
            for (m2, i), p in joint.items():
                if p == 0:
                    continue
                tgt = (m2, edges[i].target)
                row[tgt] = row.get(tgt, Fraction(0)) + p
            total = sum(row.values())
            if total != 1:
                raise BadChoice(f"kernel row at {key} sums to {total}, not 1")
            chain[key] = row
    return chain


# ------------------------------------------------------------------
# Loadable FR machine families (structured text descriptions)


def fr_from_spec(spec: Mapping, k_of: Optional[Callable[[int], int]] = None) -> Strategy:
    """Build an FR machine from a structured description.

    Supported kinds (all act on gadget-chain observations, where the
    observable at a branch node is its branch index):

    - ``fixed``: k=1, always play ``branch`` (clamped to the block's top).
    - ``mod-tracker``: k modes remembering (last branch mod k); plays the
      remembered residue, clamped.
    - ``cap-tracker``: k modes remembering min(last branch, k-1).
    - ``random-update``: like mod-tracker but the update randomizes
      uniformly over all modes (memory update noise).
    - ``table``: explicit ``actions`` (mode -> branch) and ``updates``
      (observed branch -> mode), both lists.
    """
    kind = spec["kind"]
    if kind == "fixed":
        branch = int(spec["branch"])
        return _chain_machine(1, lambda m, obs: 0, lambda m, k: branch, f"fixed-{branch}")
    k = int(spec.get("modes", 2))
    if kind == "mod-tracker":
        return _chain_machine(k, lambda m, obs: obs % k, lambda m, top: m, f"mod-{k}")
    if kind == "cap-tracker":
        return _chain_machine(k, lambda m, obs: min(obs, k - 1), lambda m, top: m, f"cap-{k}")
    if kind == "random-update":
        return _chain_machine(
            k, None, lambda m, top: m, f"rand-{k}",
            random_update=True,
        )
    if kind == "table":
        actions = [int(a) for a in spec["actions"]]
        updates = [int(u) for u in spec["updates"]]
        return _chain_machine(
            k,
            lambda m, obs: updates[obs % len(updates)],
            lambda m, top: actions[m % len(actions)],
            spec.get("name", f"table-{k}"),
        )
    raise ValueError(f"unknown FR machine kind {kind!r}")


@dataclass(frozen=True)
class ChainMachine:
    """Block-structured FR machine for gadget chains.

    ``observe(mode, branch)`` -> new mode after seeing the random branch;
    ``play(mode, top)`` -> branch index to play at the controlled state
    (values above the block's top index are clamped to top).  When
    ``random_update`` is set the observation update instead draws a mode
    uniformly.
    """

    k: int
    observe: Optional[Callable[[int, int], int]]
    play: Callable[[int, int], int]
    name: str
    random_update: bool = False

    @property
    def modes(self):
        return tuple(range(self.k))


def _chain_machine(k, observe, play, name, random_update=False) -> Strategy:
    cm = ChainMachine(k=k, observe=observe, play=play, name=name, random_update=random_update)
    return Strategy(
        StrategyClass.FR,
        machine=_as_memory_machine(cm),
        fr_modes=k,
        name=name,
        chain_machine=cm,
    )


def _as_memory_machine(cm: ChainMachine) -> MemoryMachine:
    """Realize a ChainMachine as a generic kernel over gadget states."""
    from .mdp import GadgetState  # local import to avoid a cycle

    def act(mode, state, edges):
        if isinstance(state, GadgetState) and state.role == "c":
            top = len(edges) - 1
            return _dirac(min(cm.play(mode, top), top))
        return _dirac(0)

    def update(mode, state, i, edges):
        if isinstance(state, GadgetState) and state.role == "s":
            branch = getattr(edges[i].target, "branch", i)
            if cm.random_update:
                w = Fraction(1, cm.k)
                return {m: w for m in range(cm.k)}
            return {cm.observe(mode, branch): Fraction(1)}
        return {mode: Fraction(1)}

    return machine_from_parts(tuple(range(cm.k)), 0, act, update)


# ------------------------------------------------------------------
# Class-consistency checks (assertable invariants)


def markov_consistent(strategy: Strategy, mdp: CountableMdp, runs: Sequence[RunPrefix]) -> bool:
    """Equal-length histories ending in the same state act identically."""
    seen: Dict[Tuple[StateId, int], EdgeDist] = {}
    for run in runs:
        key = (run.last, len(run))
        dist = act(strategy, mdp, run)
        if key in seen and seen[key] != dist:
            return False
        seen[key] = dist
    return True


def rc_consistent(strategy: Strategy, mdp: CountableMdp, runs: Sequence[RunPrefix]) -> bool:
    """Histories with equal running totals ending in the same state act
    identically."""
    seen: Dict[Tuple[StateId, Fraction], EdgeDist] = {}
    for run in runs:
        total = sum((Fraction(e.reward) for e in run.edges), Fraction(0))
        key = (run.last, total)
        dist = act(strategy, mdp, run)
        if key in seen and seen[key] != dist:
            return False
        seen[key] = dist
    return True
