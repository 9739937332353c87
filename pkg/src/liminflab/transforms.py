"""State-space encodings trading counters for state annotation.

Three wrappers over a base MDP: step-annotated (acyclic unrolling),
reward-annotated (point rewards become the running total), and
mean-annotated (point rewards become the running mean).  Each preserves
successor order and probabilities, so a shared uniform stream drives
base and encoded runs through corresponding branches.

Pull-backs convert a memoryless strategy on an encoding into the
matching counter-class strategy on the base MDP.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from .mdp import CountableMdp, InfiniteFan, OutEdge, RunPrefix, StateId
from .strategies import (
    ClassTooRich,
    Strategy,
    StrategyClass,
    act,
    make_markov,
    make_reward_counter,
    make_sc_rc,
)

ENCODE_STEP = "step"
ENCODE_REWARD = "reward"
ENCODE_MEAN = "mean"


@dataclass(frozen=True)
class AnnotatedState:
    """Base state plus the counters the encoding bakes in."""

    base: StateId
    step: Optional[int] = None
    total: Optional[Fraction] = None

    def canonical(self) -> str:
        parts = [str(self.base)]
        if self.step is not None:
            parts.append(f"@n{self.step}")
        if self.total is not None:
            parts.append(f"@r={self.total}")
        return "".join(parts)

    def __str__(self) -> str:
        return self.canonical()


def _wrap_edges(edges: Sequence[OutEdge], rewrite) -> list:
    out = []
    for e in edges:
        target, reward = rewrite(e)
        out.append(OutEdge(target, reward, e.probability))
    return out


def encode_step(mdp: CountableMdp) -> CountableMdp:
    """States (s, n); rewards copied; strictly acyclic by construction."""

    def kind_of(st: AnnotatedState):
        return mdp.kind_of(st.base)

    def successors_of(st: AnnotatedState):
        succ = mdp.successors_of(st.base)
        if isinstance(succ, InfiniteFan):
            return InfiniteFan(
                edge_at=lambda i: _step_edge(succ.edge_at(i), st.step),
                tail_mass=succ.tail_mass,
            )
        return _wrap_edges(succ, lambda e: (AnnotatedState(e.target, step=st.step + 1), e.reward))

    def _step_edge(e: OutEdge, n: int) -> OutEdge:
        return OutEdge(AnnotatedState(e.target, step=n + 1), e.reward, e.probability)

    return CountableMdp(
        initial=AnnotatedState(mdp.initial, step=0),
        kind_of=kind_of,
        successors_of=successors_of,
        finitely_branching=mdp.finitely_branching,
    )


def encode_reward(mdp: CountableMdp) -> CountableMdp:
    """States (s, r) at attainable reward levels, generated on demand.

    The transition into (s', r') carries reward r', so point rewards of
    the encoding equal total rewards of the base MDP.  Restricted to
    rational-reward inputs: level equality must be exact.
    """

    def kind_of(st: AnnotatedState):
        return mdp.kind_of(st.base)

    def successors_of(st: AnnotatedState):
        def rewrite(e: OutEdge):
            level = st.total + Fraction(e.reward)
            return AnnotatedState(e.target, total=level), level

        succ = mdp.successors_of(st.base)
        if isinstance(succ, InfiniteFan):
            return InfiniteFan(
                edge_at=lambda i: _reward_edge(succ.edge_at(i), st.total),
                tail_mass=succ.tail_mass,
            )
        return _wrap_edges(succ, rewrite)

    def _reward_edge(e: OutEdge, total: Fraction) -> OutEdge:
        level = total + Fraction(e.reward)
        return OutEdge(AnnotatedState(e.target, total=level), level, e.probability)

    return CountableMdp(
        initial=AnnotatedState(mdp.initial, total=Fraction(0)),
        kind_of=kind_of,
        successors_of=successors_of,
        finitely_branching=mdp.finitely_branching,
    )


def encode_mean(mdp: CountableMdp) -> CountableMdp:
    """States (s, n, r); the transition into step n' carries reward r'/n'."""

    def kind_of(st: AnnotatedState):
        return mdp.kind_of(st.base)

    def successors_of(st: AnnotatedState):
        n2 = st.step + 1

        def rewrite(e: OutEdge):
            level = st.total + Fraction(e.reward)
            return AnnotatedState(e.target, step=n2, total=level), level / n2

        succ = mdp.successors_of(st.base)
        if isinstance(succ, InfiniteFan):
            return InfiniteFan(
                edge_at=lambda i: _mean_edge(succ.edge_at(i), st.step, st.total),
                tail_mass=succ.tail_mass,
            )
        return _wrap_edges(succ, rewrite)

    def _mean_edge(e: OutEdge, n: int, total: Fraction) -> OutEdge:
        level = total + Fraction(e.reward)
        return OutEdge(AnnotatedState(e.target, step=n + 1, total=level), level / (n + 1), e.probability)

    return CountableMdp(
        initial=AnnotatedState(mdp.initial, step=0, total=Fraction(0)),
        kind_of=kind_of,
        successors_of=successors_of,
        finitely_branching=mdp.finitely_branching,
    )


def encode(mdp: CountableMdp, which: str) -> CountableMdp:
    if which == ENCODE_STEP:
        return encode_step(mdp)
    if which == ENCODE_REWARD:
        return encode_reward(mdp)
    if which == ENCODE_MEAN:
        return encode_mean(mdp)
    raise ValueError(f"unknown encoding {which!r}")


def pull_back(strategy: Strategy, which: str, encoded: CountableMdp) -> Strategy:
    """Turn a strategy on an encoding into a counter strategy on the base.

    MD input is accepted for every encoding; Markov input additionally
    for the reward encoding (yielding a step+reward counter strategy).
    The pulled-back rule rebuilds the annotated state from its counters
    and consults the encoded strategy there; successor order is shared,
    so edge indices transfer unchanged.
    """
    markov_on_reward = strategy.cls is StrategyClass.MARKOV and which == ENCODE_REWARD
    if strategy.cls is not StrategyClass.MD and not markov_on_reward:
        raise ClassTooRich(
            f"pull-back covers MD strategies (and Markov on the reward "
            f"encoding), got {strategy.cls} on {which!r}"
        )

    def consult_md(enc_state):
        return act(strategy, encoded, RunPrefix.start(enc_state))

    if which == ENCODE_STEP:
        return make_markov(lambda s, step: consult_md(AnnotatedState(s, step=step)))

    if which == ENCODE_REWARD:
        if markov_on_reward:
            def rc_rule(s, step, total, edges):
                enc_state = AnnotatedState(s, total=total)
                return strategy.rule(enc_state, step, None, encoded.edges(enc_state))

            return Strategy(StrategyClass.SC_RC, rule=rc_rule)
        return make_reward_counter(lambda s, total: consult_md(AnnotatedState(s, total=total)))

    if which == ENCODE_MEAN:
        return make_sc_rc(
            lambda s, step, total: consult_md(AnnotatedState(s, step=step, total=total))
        )

    raise ValueError(f"unknown encoding {which!r}")
