"""Seeded Monte Carlo estimation and exact dynamic programming.

Trials are reproducible: trial t draws from a dedicated Philox stream
keyed (master_seed, t), consuming uniforms in block order (branch draw,
then escape draw, plus an update draw for randomized-memory machines).
Identical plans produce identical reports bit for bit.

Verdict accounting is three-valued and never imputes the unknown mass:
an estimate is a bracket [certified-win rate, 1 - certified-loss rate].
On gadget chains the tracked loss event is the per-block error (branch
overshoot or sink/restart escape), whose complement upper-bounds every
liminf objective the chain encodes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import NormalDist
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.random import Generator, Philox

from .gadgets import BlockPlan, GadgetChain, VariantMismatch
from .mdp import BOTTOM, CountableMdp, OutEdge, RunPrefix, StateId, extend_run
from .monitors import MonitorState, PayoffKind, StructuralFacts, VerdictKind, observe, verdict
from .strategies import ChainMachine, NotFiniteMemory, Strategy, StrategyClass, act

Rat = Union[int, Fraction]

SEED_ALGORITHM = "philox2x64:key=(master,trial);block-order-draws"


def trial_rng(master_seed: int, trial: int) -> Generator:
    return Generator(Philox(key=[master_seed, trial]))


def z_value(confidence: float) -> float:
    return NormalDist().inv_cdf((1 + confidence) / 2)


def wilson_interval(successes: int, trials: int, confidence: float) -> Tuple[float, float]:
    """Wilson score interval for a binomial rate."""
    if trials == 0:
        return 0.0, 1.0
    z = z_value(confidence)
    phat = successes / trials
    z2 = z * z / trials
    center = (phat + z2 / 2) / (1 + z2)
    half = z * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials)) / (1 + z2)
    return max(0.0, center - half), min(1.0, center + half)


def wilson_band(p: float, trials: int, confidence: float) -> Tuple[float, float]:
    """Wilson-style acceptance band for observed frequencies around a
    known probability p."""
    z = z_value(confidence)
    z2 = z * z / trials
    center = (p + z2 / 2) / (1 + z2)
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials)) / (1 + z2)
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class TrialPlan:
    """A reproducible Monte Carlo experiment description."""

    strategy: Strategy
    trials: int
    horizon: int  # blocks on chains, steps elsewhere
    master_seed: int
    chain: Optional[GadgetChain] = None
    mdp: Optional[CountableMdp] = None
    facts: Optional[StructuralFacts] = None
    monitor: Optional[PayoffKind] = None
    confidence: float = 0.99
    unknown_tolerance: float = 1.0
    track_block_errors: bool = True  # chains: count overshoot/escape as loss

    def __post_init__(self):
        if self.trials < 1 or self.horizon < 1:
            raise ValueError("trials and horizon must be >= 1")
        if (self.chain is None) == (self.mdp is None):
            raise ValueError("plan needs exactly one of chain or mdp")


@dataclass(frozen=True)
class EstimateReport:
    cert_win: int
    cert_lose: int
    unknown: int
    trials: int
    bracket_lo: float
    bracket_hi: float
    wilson_win: Tuple[float, float]
    wilson_lose: Tuple[float, float]
    confidence: float
    seed: int
    seed_algorithm: str
    elapsed: float

    @property
    def win_rate(self) -> float:
        return self.cert_win / self.trials

    @property
    def lose_rate(self) -> float:
        return self.cert_lose / self.trials

    def to_dict(self) -> dict:
        return {
            "cert_win": self.cert_win,
            "cert_lose": self.cert_lose,
            "unknown": self.unknown,
            "trials": self.trials,
            "bracket_lo": self.bracket_lo,
            "bracket_hi": self.bracket_hi,
            "wilson_win": list(self.wilson_win),
            "wilson_lose": list(self.wilson_lose),
            "confidence": self.confidence,
            "seed": self.seed,
            "seed_algorithm": self.seed_algorithm,
            "elapsed": self.elapsed,
        }


def _make_report(win, lose, unknown, trials, confidence, seed, t0) -> EstimateReport:
    w_lo, w_hi = wilson_interval(win, trials, confidence)
    l_lo, l_hi = wilson_interval(lose, trials, confidence)
    return EstimateReport(
        cert_win=win,
        cert_lose=lose,
        unknown=unknown,
        trials=trials,
        bracket_lo=w_lo,
        bracket_hi=1 - l_lo,
        wilson_win=(w_lo, w_hi),
        wilson_lose=(l_lo, l_hi),
        confidence=confidence,
        seed=seed,
        seed_algorithm=SEED_ALGORITHM,
        elapsed=time.monotonic() - t0,
    )


def run_trials(plan: TrialPlan) -> EstimateReport:
    t0 = time.monotonic()
    if plan.chain is not None:
        win, lose, unknown = _run_chain_trials(plan)
    else:
        win, lose, unknown = _run_generic_trials(plan)
    report = _make_report(
        win, lose, unknown, plan.trials, plan.confidence, plan.master_seed, t0
    )
    if report.unknown / plan.trials > plan.unknown_tolerance:
        raise RuntimeError(
            f"unknown verdict mass {report.unknown}/{plan.trials} exceeds "
            f"tolerance {plan.unknown_tolerance}"
        )
    return report


# ------------------------------------------------------------------
# Chain engine (block-level)


@dataclass
class _BlockTable:
    """Float views of per-block parameters for the sampling loop."""

    first: int
    cdf: np.ndarray  # (H, max_branches) cumulative branch probabilities
    eps: np.ndarray  # (H, max_branches) escape probabilities
    k: np.ndarray  # (H,) top branch index


def _block_table(chain: GadgetChain, first: int, horizon: int) -> _BlockTable:
    sched = chain.schedule
    ks = [sched.k_of(n) for n in range(first, first + horizon)]
    width = max(ks) + 1
    cdf = np.ones((horizon, width))
    eps = np.zeros((horizon, width))
    for row, n in enumerate(range(first, first + horizon)):
        acc = 0.0
        for i in range(ks[row] + 1):
            acc += float(sched.delta(i, n))
            cdf[row, i] = acc
        cdf[row, ks[row]] = 1.0 + 1e-9  # guard against rounding at the top
        for i in range(ks[row]):
            eps[row, i] = float(sched.epsilon(i, n))
    return _BlockTable(first, cdf, eps, np.array(ks))


def _run_chain_trials(plan: TrialPlan) -> Tuple[int, int, int]:
    chain = plan.chain
    strategy = plan.strategy
    if strategy.chain_machine is not None:
        return _chain_trials_machine(plan, strategy.chain_machine)
    block_plan = strategy.meta.get("block_plan")
    if block_plan is None:
        raise VariantMismatch(
            "chain plans need a canonical chain strategy or a chain machine"
        )
    return _chain_trials_plan(plan, block_plan)


def _chain_trials_plan(plan: TrialPlan, block_plan: BlockPlan) -> Tuple[int, int, int]:
    """Mimic / skip-then-mimic: the only loss event is the escape draw
    of the matched branch; overshoot never happens."""
    chain = plan.chain
    first = max(chain.n_star, block_plan.skip_until)
    table = _block_table(chain, first, plan.horizon)
    lose = 0
    for t in range(plan.trials):
        rng = trial_rng(plan.master_seed, t)
        u = rng.random((plan.horizon, 2))
        branches = (u[:, [0]] > table.cdf).sum(axis=1)
        died = u[:, 1] < table.eps[np.arange(plan.horizon), branches]
        if died.any():
            lose += 1
    return 0, lose, plan.trials - lose


def _chain_trials_machine(plan: TrialPlan, cm: ChainMachine) -> Tuple[int, int, int]:
    """FR machine on the chain: loss event is overshoot or escape."""
    chain = plan.chain
    table = _block_table(chain, chain.n_star, plan.horizon)
    lose = 0
    ks = table.k
    for t in range(plan.trials):
        rng = trial_rng(plan.master_seed, t)
        u = rng.random((plan.horizon, 3))
        mode = 0
        for row in range(plan.horizon):
            k = ks[row]
            i = int((u[row, 0] > table.cdf[row]).sum())
            if cm.random_update:
                mode = min(int(u[row, 2] * cm.k), cm.k - 1)
            else:
                mode = cm.observe(mode, i)
            j = min(cm.play(mode, k), k)
            if j > i or (j < k and u[row, 1] < table.eps[row, j]):
                lose += 1
                break
    return 0, lose, plan.trials - lose


# ------------------------------------------------------------------
# Generic engine (step-level, exact rewards, monitors, verdicts)


def _run_generic_trials(plan: TrialPlan) -> Tuple[int, int, int]:
    mdp = plan.mdp
    facts = plan.facts or StructuralFacts.none()
    kind = plan.monitor or PayoffKind.MEAN
    win = lose = unknown = 0
    for t in range(plan.trials):
        rng = trial_rng(plan.master_seed, t)
        outcome = simulate_run(
            mdp, plan.strategy, plan.horizon, rng, facts=facts, kind=kind
        )
        if outcome.kind is VerdictKind.CERT_WIN:
            win += 1
        elif outcome.kind is VerdictKind.CERT_LOSE:
            lose += 1
        else:
            unknown += 1
    return win, lose, unknown


def simulate_run(
    mdp: CountableMdp,
    strategy: Strategy,
    horizon: int,
    rng,
    facts: Optional[StructuralFacts] = None,
    kind: PayoffKind = PayoffKind.MEAN,
):
    """One seeded run to the step horizon; returns the final verdict."""
    facts = facts or StructuralFacts.none()
    run = RunPrefix.start(mdp.initial)
    mon = MonitorState()
    for _ in range(horizon):
        s = run.last
        v = verdict(facts, s, mon, kind)
        if v.decided:
            return v
        if mdp.is_random(s):
            extend_run(mdp, run, rng=rng)
        else:
            choice = _strategy_edge(strategy, mdp, run, rng)
            extend_run(mdp, run, choice=choice)
        mon = observe(mon, run.edges[-1].reward)
    return verdict(facts, run.last, mon, kind)


def _strategy_edge(strategy: Strategy, mdp: CountableMdp, run: RunPrefix, rng) -> int:
    if strategy.rule is not None:
        total = sum((Fraction(e.reward) for e in run.edges), Fraction(0))
        out = strategy.rule(run.last, len(run), total, mdp.edges(run.last))
        if isinstance(out, int):
            return out
        return _sample_dist(out, rng)
    dist = act(strategy, mdp, run)
    return _sample_dist(dist, rng)


def _sample_dist(dist: Dict[int, Fraction], rng) -> int:
    support = [(i, p) for i, p in sorted(dist.items()) if p > 0]
    if len(support) == 1:
        return support[0][0]
    u = rng.random()
    acc = 0.0
    last = support[-1][0]
    for i, p in support:
        acc += float(p)
        if u < acc:
            return i
    return last


def payoff_trace(
    mdp: CountableMdp, strategy: Strategy, horizon: int, rng
) -> List[Tuple[Fraction, Fraction, Fraction]]:
    """Exact (point, mean, total) payoff sequence of one seeded run.

    Two MDPs whose branch probabilities and successor order agree step
    for step produce matching traces under the same uniform stream,
    which is what the encoding-equivalence checks exercise.
    """
    run = RunPrefix.start(mdp.initial)
    mon = MonitorState()
    out: List[Tuple[Fraction, Fraction, Fraction]] = []
    for _ in range(horizon):
        s = run.last
        if mdp.is_random(s):
            extend_run(mdp, run, rng=rng)
        else:
            extend_run(mdp, run, choice=_strategy_edge(strategy, mdp, run, rng))
        mon = observe(mon, run.edges[-1].reward)
        out.append((mon.last, mon.mean, mon.total))
    return out


# ------------------------------------------------------------------
# Exact block DP on chains


@dataclass(frozen=True)
class BlockDpResult:
    """P(no block error through the first N blocks), per N."""

    first: int
    survive_clean: Tuple[Fraction, ...]  # index b: through blocks first..first+b
    p_escape: Fraction
    p_overshoot: Fraction

    def through(self, blocks: int) -> Fraction:
        return self.survive_clean[blocks - 1]


def exact_block_dp(
    chain: GadgetChain, strategy: Strategy, blocks: int
) -> BlockDpResult:
    """Forward DP over (memory mode, clean) in exact rationals.

    The per-block error event is overshoot (playing above the drawn
    branch, which buries the mean under the m_n scale) or the escape
    draw (sink, or restart on restart chains).  For canonical plan
    strategies the DP collapses to the survival product.
    """
    if not chain.schedule.exact:
        raise VariantMismatch("exact DP needs an exact-rational schedule")
    sched = chain.schedule
    if strategy.chain_machine is not None:
        return _machine_dp(chain, strategy.chain_machine, blocks)
    block_plan = strategy.meta.get("block_plan")
    if block_plan is None:
        raise NotFiniteMemory("block DP needs a chain machine or canonical plan")
    first = max(chain.n_star, block_plan.skip_until)
    out: List[Fraction] = []
    alive = Fraction(1)
    p_escape = Fraction(0)
    for n in range(first, first + blocks):
        loss = sched.loss(n)
        p_escape += alive * loss
        alive *= 1 - loss
        out.append(alive)
    return BlockDpResult(first, tuple(out), p_escape, Fraction(0))


def _machine_dp(chain: GadgetChain, cm: ChainMachine, blocks: int) -> BlockDpResult:
    sched = chain.schedule
    first = chain.n_star
    dist: Dict[int, Fraction] = {0: Fraction(1)}
    out: List[Fraction] = []
    p_escape = Fraction(0)
    p_overshoot = Fraction(0)
    uniform = Fraction(1, cm.k)
    for n in range(first, first + blocks):
        k = sched.k_of(n)
        deltas = [sched.delta(i, n) for i in range(k + 1)]
        epss = [sched.epsilon(i, n) for i in range(k + 1)]
        nxt: Dict[int, Fraction] = {}
        for mode, w in dist.items():
            if w == 0:
                continue
            for i in range(k + 1):
                p_branch = w * deltas[i]
                if p_branch == 0:
                    continue
                if cm.random_update:
                    updates = [(m2, uniform) for m2 in range(cm.k)]
                else:
                    updates = [(cm.observe(mode, i), Fraction(1))]
                for m2, q in updates:
                    p_here = p_branch * q
                    j = min(cm.play(m2, k), k)
                    if j > i:
                        p_overshoot += p_here
                        continue
                    esc = epss[j]
                    if esc:
                        p_escape += p_here * esc
                    good = p_here * (1 - esc)
                    if good:
                        nxt[m2] = nxt.get(m2, Fraction(0)) + good
        dist = nxt
        out.append(sum(dist.values(), Fraction(0)))
    return BlockDpResult(first, tuple(out), p_escape, p_overshoot)


def restart_count_dp(
    chain: GadgetChain, strategy: Strategy, horizon: int, max_restarts: int
) -> List[Fraction]:
    """P(at least r restarts within the block horizon), r = 0..max.

    For the canonical restart strategy (skip to the certified index,
    mimic, start over two blocks later in the next row after every
    restart).  Exact; truncation at the horizon only undercounts, so
    the values lower-bound the untruncated probabilities.
    """
    if not chain.options.restart:
        raise VariantMismatch("restart-count DP needs a restart chain")
    block_plan = strategy.meta.get("block_plan")
    if block_plan is None:
        raise VariantMismatch("restart-count DP expects a canonical plan strategy")
    sched = chain.schedule
    first = chain.n_star
    end = first + horizon
    losses = {n: sched.loss(n) for n in range(first, end)}
    # prefix survival: surv[n] = prod_{b in [first, n)} (1 - loss(b))
    surv: Dict[int, Fraction] = {first: Fraction(1)}
    for n in range(first, end):
        surv[n + 1] = surv[n] * (1 - losses[n])
    # restart mass at block n from an entry e (with the plan skipping to
    # start(e) = max(e, skip_until)) is w_e * surv[n]/surv[start(e)] *
    # loss(n); sweeping n with a running sum of w_e/surv[start(e)] makes
    # each row linear in the horizon.
    at_least = [Fraction(0)] * (max_restarts + 1)
    at_least[0] = Fraction(1)
    entries: Dict[int, Fraction] = {first: Fraction(1)}
    for r in range(1, max_restarts + 1):
        nxt: Dict[int, Fraction] = {}
        pending = sorted(entries.items())
        idx = 0
        weighted = Fraction(0)
        for n in range(first, end):
            while idx < len(pending) and max(pending[idx][0], block_plan.skip_until) <= n:
                e, w = pending[idx]
                weighted += w / surv[max(e, block_plan.skip_until)]
                idx += 1
            if weighted:
                p_restart = weighted * surv[n] * losses[n]
                if p_restart:
                    target = n + 2
                    if target < end:
                        nxt[target] = nxt.get(target, Fraction(0)) + p_restart
                    at_least[r] += p_restart
        entries = nxt
        if not entries and at_least[r] == 0:
            break
    return at_least


# ------------------------------------------------------------------
# Finite-horizon safety values


def finite_horizon_safety_value(
    mdp: CountableMdp,
    start: StateId,
    bad_transitions: Callable[[StateId, StateId], bool],
    k: int,
) -> Fraction:
    """sup over strategies of P(avoid the bad transitions for k steps).

    Exact backward induction over the reachable fragment.
    """
    memo: Dict[Tuple[StateId, int], Fraction] = {}

    def value(s: StateId, steps: int) -> Fraction:
        if steps == 0:
            return Fraction(1)
        key = (s, steps)
        if key in memo:
            return memo[key]
        edges = mdp.edges(s)
        if mdp.is_random(s):
            v = Fraction(0)
            for e in edges:
                inner = Fraction(0) if bad_transitions(s, e.target) else value(e.target, steps - 1)
                v += Fraction(e.probability) * inner
        else:
            v = Fraction(0)
            for e in edges:
                inner = Fraction(0) if bad_transitions(s, e.target) else value(e.target, steps - 1)
                v = max(v, inner)
        memo[key] = v
        return v

    return value(start, k)


def exhaustive_safety_value(
    mdp: CountableMdp,
    start: StateId,
    bad_transitions: Callable[[StateId, StateId], bool],
    k: int,
) -> Fraction:
    """Oracle: enumerate all deterministic step-dependent strategies up
    to depth k (tiny instances only) and take the best avoidance
    probability.  History-dependent choice is evaluated recursively, so
    this is a true sup over general strategies at horizon k."""

    def value(s: StateId, steps: int) -> Fraction:
        if steps == 0:
            return Fraction(1)
        edges = mdp.edges(s)
        if mdp.is_random(s):
            total = Fraction(0)
            for e in edges:
                inner = Fraction(0) if bad_transitions(s, e.target) else value(e.target, steps - 1)
                total += Fraction(e.probability) * inner
            return total
        best = Fraction(0)
        for e in edges:
            inner = Fraction(0) if bad_transitions(s, e.target) else value(e.target, steps - 1)
            best = max(best, inner)
        return best

    return value(start, k)


# ------------------------------------------------------------------
# Infinitely branching cycle gadget: analytics and cycle-level trials


def escalating_survival_enclosure(levels: int):
    """Enclosure of prod_{k>=1}(1 - 2^-k): never hitting the reset when
    the k-th cycle uses branch k.  Exact dyadic partial times the
    [1 - tail-sum, 1] bracket."""
    from .intervals import Enclosure

    partial = Fraction(1)
    for k in range(1, levels + 1):
        partial *= 1 - Fraction(1, 2 ** k)
    return Enclosure(partial * (1 - Fraction(1, 2 ** levels)), partial)


def fixed_branch_hit_probability(i: int, cycles: int) -> Fraction:
    """P(reset within the given cycles when every cycle uses branch i)."""
    return 1 - (1 - Fraction(1, 2 ** i)) ** cycles


def cycles_to_exceed(i: int, target: Fraction) -> int:
    """Least cycle count with hit probability >= target (exact check)."""
    p = Fraction(1, 2 ** i)
    h = max(1, math.ceil(math.log(1 - float(target)) / math.log(1 - float(p))))
    while fixed_branch_hit_probability(i, h) < target:
        h += 1
    while h > 1 and fixed_branch_hit_probability(i, h - 1) >= target:
        h -= 1
    return h


def cycle_trials(
    branch_of_cycle: Callable[[int], int],
    cycles: int,
    trials: int,
    master_seed: int,
) -> int:
    """Number of trials that hit the reset within the cycle horizon."""
    hits = 0
    for t in range(trials):
        rng = trial_rng(master_seed, t)
        u = rng.random(cycles)
        for c in range(cycles):
            if u[c] < 2.0 ** -branch_of_cycle(c + 1):
                hits += 1
                break
    return hits
