"""Gadget parameter schedules and their series analysis.

A schedule bundles the branch probabilities delta_i(n), the escape
probabilities epsilon_i(n), the branching growth k(n), and the reward
scale m_n that drive gadget construction.  Four families:

- faithful-a / faithful-b: the iterated-logarithm family.  Its
  interesting regime (k(n) >= 2) begins near 5e23, so all quantities
  are certified interval enclosures or symbolic tower expressions.
- rationalized-a / rationalized-b: the faithful values snapped up to
  nearby dyadic rationals (within 2^-n), making exact arithmetic
  available downstream.
- accelerated: explicit coefficient * log-power tables per branch,
  piecewise in n (a finite prefix may be tuned freely; the unbounded
  tail piece carries the convergence/divergence hypotheses, which are
  validated with the series classifier at load time).

The defining hypotheses mirror the lower-bound machinery: each branch's
sum of delta_i * epsilon_i converges (careful play survives), while
sum delta_j * epsilon_i for i < j and sum delta_i both diverge (any
branch confusion accumulates fatal risk).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from mpmath import iv

from .bigexpr import BigExpr, log_iter, tower
from .intervals import Enclosure, iv_from_rat, iv_hi, iv_lo, with_prec
from .series import (
    CONVERGENT,
    DIVERGENT,
    LogPowerTerm,
    classify,
    tail_upper_bound,
)

Rat = Union[int, Fraction]


class OutOfRange(ValueError):
    pass


class HypothesisViolated(ValueError):
    """A schedule fails the convergence/divergence requirements."""


# Snap grid for irrational table entries: round up to multiples of
# 2^-SNAP_GUARD / n^2.  Rounding up preserves every divergence; the
# extra mass is dominated by a convergent 1/n^2 series, so convergence
# hypotheses survive too, and denominators stay polynomial in n (exact
# DP over hundreds of blocks remains cheap).
SNAP_GUARD = 32


def snap_up(x, n: int) -> Fraction:
    """Smallest grid rational strictly above the interval's upper end."""
    hi = Fraction(x) if isinstance(x, (int, Fraction)) else iv_hi(x)
    grid = Fraction(1, (2 ** SNAP_GUARD) * n * n)
    return (hi // grid + 1) * grid


@dataclass(frozen=True)
class TermSpec:
    """coef / (n^a0 * prod log_i(n)^a_i); the evaluable series atom."""

    coef: Fraction
    term: LogPowerTerm

    @staticmethod
    def of(coef: Rat, *exponents: Rat) -> "TermSpec":
        return TermSpec(Fraction(coef), LogPowerTerm.of(*exponents))

    @property
    def exact(self) -> bool:
        e = self.term.exponents
        return len(e) == 1 and e[0].denominator == 1

    def value(self, n: int) -> Fraction:
        """Exact rational value; irrational forms are snapped up."""
        if self.exact:
            return self.coef / Fraction(n) ** int(self.term.exponents[0])
        return snap_up(iv_from_rat(self.coef) * self.term.value(n), n)

    def value_iv(self, n: int):
        return iv_from_rat(self.coef) * self.term.value(n)


@dataclass(frozen=True)
class BranchPiece:
    start: int
    end: Optional[int]  # exclusive; None = unbounded tail
    delta: TermSpec
    epsilon: TermSpec


@dataclass(frozen=True)
class BranchSpec:
    pieces: Tuple[BranchPiece, ...]

    def piece_at(self, n: int) -> BranchPiece:
        for p in self.pieces:
            if n >= p.start and (p.end is None or n < p.end):
                return p
        raise OutOfRange(f"no table piece covers n={n}")

    @property
    def tail(self) -> BranchPiece:
        last = self.pieces[-1]
        if last.end is not None:
            raise OutOfRange("branch table has no unbounded tail piece")
        return last


# ------------------------------------------------------------------
# Faithful family


class FaithfulSchedule:
    """Iterated-logarithm schedule; interval values, symbolic thresholds.

    delta_i(n) = 1/log_{i+1}(n); epsilon_i(n) = 1/(n log n ... log_{i+1} n);
    the top branch index k(n) takes the remaining probability and its
    escape probability is 0.  k(n) steps up at certified threshold
    over-approximations h(i) built from tail-bound inversion (g), tower
    well-definedness, and unit partial-sum blocks; beyond machine range
    the thresholds stay symbolic and comparisons peel exponentials.
    """

    family = "faithful"
    exact = False

    def __init__(self, variant: str = "A", name: Optional[str] = None):
        if variant not in ("A", "B"):
            raise ValueError("variant must be 'A' or 'B'")
        self.variant = variant
        self.name = name or f"faithful-{variant.lower()}"
        self.kmax: Optional[int] = None
        self._h_cache: Dict[int, Union[int, BigExpr]] = {1: 2}
        self._m_cache: Dict[int, int] = {}
        # first n with k(n) >= 1 and sum of non-top deltas <= 1; the raw
        # threshold 2 has delta_0 > 1 (log 2 < 1), so start at 3.
        self.n_star = 3

    # -- parameter terms (symbolic descriptors)

    @staticmethod
    def delta_term(i: int) -> LogPowerTerm:
        exps = [Fraction(0)] * (i + 2)
        exps[i + 1] = Fraction(1)
        return LogPowerTerm.of(*exps)

    @staticmethod
    def epsilon_term(i: int) -> LogPowerTerm:
        return LogPowerTerm.of(*([Fraction(1)] * (i + 2)))

    @staticmethod
    def loss_term(i: int) -> LogPowerTerm:
        """delta_i * epsilon_i: the (1, ..., 1, 2) vector."""
        exps = [Fraction(1)] * (i + 2)
        exps[i + 1] = Fraction(2)
        return LogPowerTerm.of(*exps)

    # -- values

    def delta(self, i: int, n) -> object:
        k = self.k_of(n) if isinstance(n, int) else None
        if isinstance(n, int):
            self._check_range(i, n, k)
            if i == k:
                return self._top(n, k)
        return 1 / log_iter(i + 1, n)

    def epsilon(self, i: int, n: int):
        k = self.k_of(n)
        self._check_range(i, n, k)
        if i == k:
            return iv.mpf(0)
        acc = iv_from_rat(n)
        for lvl in range(1, i + 2):
            acc = acc * log_iter(lvl, n)
        return 1 / acc

    def _top(self, n: int, k: int):
        total = iv.mpf(0)
        for i in range(k):
            total = total + 1 / log_iter(i + 1, n)
        return 1 - total

    def _check_range(self, i: int, n: int, k: int) -> None:
        if n < self.n_star:
            raise OutOfRange(f"n={n} below first well-defined index {self.n_star}")
        if not 0 <= i <= k:
            raise OutOfRange(f"branch {i} out of range at n={n} (k={k})")

    def loss(self, n: int):
        k = self.k_of(n)
        acc = iv.mpf(0)
        for i in range(k):
            acc = acc + self.delta(i, n) * self.epsilon(i, n)
        return acc

    # -- thresholds

    def g(self, i: int) -> Union[int, BigExpr]:
        """Certified over-approximation of the least N whose
        delta_{i-1} epsilon_{i-1} tail drops to 2^-i.

        The certified tail bound is 1/log_i(N), so exp-iterating 2^i
        inverts it exactly; the true minimum may be smaller, which no
        downstream bound minds.
        """
        if i < 1:
            raise OutOfRange("g is defined for i >= 1")
        node = BigExpr.of(2 ** i)
        for _ in range(i):
            node = BigExpr.exp(node)
        return _as_int_if_small(node)

    def h(self, i: int) -> Union[int, BigExpr]:
        if i < 1:
            raise OutOfRange("h is defined for i >= 1")
        if i not in self._h_cache:
            prev = self.h(i - 1)
            args = [self.g(i), tower(i + 1), self._unit_block_end(i, prev)]
            best = args[0]
            for a in args[1:]:
                if _be(a) > _be(best):
                    best = a
            self._h_cache[i] = _ceil_arg(best)
        return self._h_cache[i]

    def _unit_block_end(self, i: int, start) -> Union[int, BigExpr]:
        """Certified over-approximation of the least m+1 with
        sum_{n=start}^{m} epsilon_{i-2}(n) >= 1 (the h recurrence's
        third argument; here i names h's target index)."""
        lvl = i - 2  # epsilon level
        if lvl < 0:
            return 2
        if isinstance(start, int) and start < 10 ** 6 and lvl == 0:
            # direct certified summation (the raw formula is defined for
            # n >= 2 even where the term's monotone range starts later)
            acc = iv.mpf(0)
            n = start
            while True:
                acc = acc + 1 / (iv_from_rat(n) * log_iter(1, n))
                if iv_lo(acc) >= 1:
                    return n + 1
                n += 1
                if n > 10 ** 6:
                    break
        # integral lower bound: the epsilon_lvl sum from start to m
        # exceeds log_{lvl+2}(m) - log_{lvl+2}(start); over-approximate
        # via q >= log_{lvl+2}(start) + 1 and m = exp^{lvl+2}(q).
        peeled = log_iter(lvl + 2, start)
        if isinstance(peeled, BigExpr):
            enc = peeled.numeric()
            if enc is None:
                node = BigExpr.exp(peeled)  # e^q >= q + 1
            else:
                node = BigExpr.of(iv_hi(enc) + 1)
        else:
            node = BigExpr.of(iv_hi(peeled) + 1)
        for _ in range(lvl + 2):
            node = BigExpr.exp(node)
        return _as_int_if_small(node)

    def k_of(self, n: int) -> int:
        if n < 2:
            raise OutOfRange(f"k undefined below n=2, got {n}")
        i = 1
        while True:
            nxt = self.h(i + 1)
            if isinstance(nxt, int):
                if n < nxt:
                    return i
            else:
                if _be(n) < nxt:
                    return i
            i += 1

    # -- rewards

    def m(self, n: int) -> int:
        return _m_recurrence(self, n)

    def tail_sum_enclosure(self, M: int) -> Tuple[Fraction, Fraction]:
        """Certified bounds on sum_{n >= M} loss(n).

        Branch 0 gets a sharp integral sandwich; branches b >= 1 appear
        only beyond h(b+1) >= g(b+1), where their whole tail is at most
        2^-(b+1), contributing the conservative 1/2 overall.  The lower
        bound keeps only branch 0.
        """
        if M < self.n_star:
            raise OutOfRange("tail enclosure needs M >= first index")
        t0 = self.loss_term(0)
        lo = _integral_lo(t0, M)
        hi = _integral_hi(t0, M) + iv_hi(t0.value(M)) + Fraction(1, 2)
        return lo, hi

    def manifest(self) -> dict:
        return {"family": self.family, "variant": self.variant, "name": self.name}


def _be(x) -> BigExpr:
    return x if isinstance(x, BigExpr) else BigExpr.of(x)


def _as_int_if_small(node: BigExpr) -> Union[int, BigExpr]:
    from .bigexpr import ceil_certified

    enc = node.numeric()
    if enc is None:
        return node
    hi = iv_hi(enc)
    if hi > Fraction(10) ** 40:
        return node
    return ceil_certified(enc)


def _ceil_arg(x: Union[int, BigExpr]) -> Union[int, BigExpr]:
    return x if isinstance(x, int) else _as_int_if_small(x)


def _integral_hi(term: LogPowerTerm, M: int) -> Fraction:
    """Upper bound on the integral of term from M to infinity."""
    return tail_upper_bound(term, M)  # the integral-from-M form


def _integral_lo(term: LogPowerTerm, M: int) -> Fraction:
    """Lower bound on sum_{n>=M} term(n) via the integral from M."""
    from .series import deciding_index, _ipow  # shared antiderivative

    j = deciding_index(term)
    p = term.exponents[j]
    trailing = term.exponents[j + 1:]
    if any(a != 0 for a in trailing):
        return Fraction(0)  # conservative; not needed for schedule terms
    with with_prec(160):
        head = log_iter(j, M) if j > 0 else iv_from_rat(M)
        integral = _ipow(head, 1 - p) / iv_from_rat(p - 1)
        return max(Fraction(0), iv_lo(integral))


# ------------------------------------------------------------------
# Rationalized wrapper


class RationalizedSchedule:
    """Faithful values snapped to dyadics in (value, value + 2^-n).

    Keeps the faithful threshold table: any threshold family satisfying
    the defining tail/partial-sum properties works, and the snapped
    values dominate the faithful ones so every divergence carries over.
    """

    family = "rationalized"
    exact = True

    def __init__(self, base: FaithfulSchedule, name: Optional[str] = None):
        self.base = base
        self.variant = base.variant
        self.name = name or f"rationalized-{base.variant.lower()}"
        self.n_star = base.n_star
        self.kmax = base.kmax
        self._cache: Dict[Tuple[str, int, int], Fraction] = {}

    def k_of(self, n: int) -> int:
        return self.base.k_of(n)

    def delta(self, i: int, n: int) -> Fraction:
        k = self.k_of(n)
        if i == k:
            return 1 - sum(self.delta(j, n) for j in range(k))
        key = ("d", i, n)
        if key not in self._cache:
            self._cache[key] = _snap_within(self.base.delta(i, n), n)
        return self._cache[key]

    def epsilon(self, i: int, n: int) -> Fraction:
        if i == self.k_of(n):
            return Fraction(0)
        key = ("e", i, n)
        if key not in self._cache:
            self._cache[key] = _snap_within(self.base.epsilon(i, n), n)
        return self._cache[key]

    def loss(self, n: int) -> Fraction:
        return sum(
            (self.delta(i, n) * self.epsilon(i, n) for i in range(self.k_of(n))),
            Fraction(0),
        )

    def m(self, n: int) -> int:
        return self.base.m(n)

    def tail_sum_enclosure(self, M: int) -> Tuple[Fraction, Fraction]:
        lo, hi = self.base.tail_sum_enclosure(M)
        # snapped products exceed faithful ones by < 3 * 2^-n per branch
        slack = Fraction(6, 2 ** M)
        return lo, hi + slack

    def manifest(self) -> dict:
        return {"family": self.family, "variant": self.variant, "name": self.name}


def _snap_within(x, n: int) -> Fraction:
    """Dyadic in (value, value + 2^-n), certified against the enclosure."""
    lo, hi = iv_lo(x), iv_hi(x)
    grid = Fraction(1, 2 ** (n + 2))
    snapped = (hi // grid + 1) * grid
    if not (snapped > hi and snapped - lo < Fraction(1, 2 ** n)):
        raise ArithmeticError("snap failed to land inside (value, value + 2^-n)")
    return snapped


# ------------------------------------------------------------------
# Accelerated family


class AcceleratedSchedule:
    """Explicit rational branch tables with a capped linear k-growth.

    ``branches[i]`` gives the delta/epsilon pieces of branch i; branch i
    participates once k(n) > i.  The unbounded tail pieces must satisfy
    the convergence/divergence hypotheses; finite prefix pieces are free
    (they cannot affect any liminf objective or series classification)
    and are where desk-scale experiments concentrate their probability.
    """

    family = "accelerated"
    exact = True

    def __init__(
        self,
        name: str,
        variant: str,
        n_star: int,
        width: int,
        kmax: int,
        branches: Sequence[BranchSpec],
    ):
        if len(branches) != kmax:
            raise ValueError("need exactly kmax branch specs")
        self.name = name
        self.variant = variant
        self.n_star = n_star
        self.width = width
        self.kmax = kmax
        self.branches = tuple(branches)
        self._m_cache: Dict[int, int] = {}
        self._val_cache: Dict[Tuple[str, int, int], Fraction] = {}

    def k_of(self, n: int) -> int:
        if n < self.n_star:
            raise OutOfRange(f"n={n} below schedule start {self.n_star}")
        return min(1 + (n - self.n_star) // self.width, self.kmax)

    def branch_start(self, i: int) -> int:
        """First n at which branch i participates (k(n) > i)."""
        return self.n_star + i * self.width if i else self.n_star

    def delta(self, i: int, n: int) -> Fraction:
        k = self.k_of(n)
        if not 0 <= i <= k:
            raise OutOfRange(f"branch {i} out of range at n={n} (k={k})")
        key = ("d", i, n)
        if key not in self._val_cache:
            if i == k:
                v = 1 - sum(self.delta(j, n) for j in range(k))
            else:
                v = self.branches[i].piece_at(n).delta.value(n)
            self._val_cache[key] = v
        return self._val_cache[key]

    def epsilon(self, i: int, n: int) -> Fraction:
        k = self.k_of(n)
        if not 0 <= i <= k:
            raise OutOfRange(f"branch {i} out of range at n={n} (k={k})")
        if i == k:
            return Fraction(0)
        key = ("e", i, n)
        if key not in self._val_cache:
            self._val_cache[key] = self.branches[i].piece_at(n).epsilon.value(n)
        return self._val_cache[key]

    def loss(self, n: int) -> Fraction:
        key = ("l", 0, n)
        if key not in self._val_cache:
            self._val_cache[key] = sum(
                (self.delta(i, n) * self.epsilon(i, n) for i in range(self.k_of(n))),
                Fraction(0),
            )
        return self._val_cache[key]

    def m(self, n: int) -> int:
        return _m_recurrence(self, n)

    def tail_sum_enclosure(self, M: int) -> Tuple[Fraction, Fraction]:
        """Certified bounds on sum_{n >= M} loss(n).

        Finite pieces overlapping [M, inf) are summed exactly; tail
        pieces get the integral sandwich, shifted to each branch's
        participation start.  Snap rounding adds at most 2^-(guard+n)
        per evaluation, absorbed into a single geometric correction.
        """
        lo = Fraction(0)
        hi = Fraction(0)
        for i, spec in enumerate(self.branches):
            start = max(M, self.branch_start(i))
            tail_piece = spec.tail
            # exact prefix within finite pieces
            n = start
            while n < tail_piece.start:
                piece = spec.piece_at(n)
                v = piece.delta.value(n) * piece.epsilon.value(n)
                lo += v
                hi += v
                n += 1
            t = tail_piece.delta.term * tail_piece.epsilon.term
            coef = tail_piece.delta.coef * tail_piece.epsilon.coef
            first = max(start, tail_piece.start, t.n_min())
            lo += coef * _integral_lo(t, first)
            hi += coef * (_integral_hi(t, first) + iv_hi(t.value(first)))
            if not (tail_piece.delta.exact and tail_piece.epsilon.exact):
                # snapped factors inflate each product by < 3 grid(n);
                # sum of grid(n) over n >= first is below 2/(2^guard first)
                hi += Fraction(8, 2 ** SNAP_GUARD * first)
        return lo, hi

    def hypothesis_report(self) -> List[str]:
        """Convergence/divergence findings; empty means all hypotheses hold."""
        problems: List[str] = []
        for i, spec in enumerate(self.branches):
            d_i = spec.tail.delta.term
            e_i = spec.tail.epsilon.term
            if classify(d_i * e_i) != CONVERGENT:
                problems.append(f"sum delta_{i}*epsilon_{i} must converge")
            if classify(d_i) != DIVERGENT:
                problems.append(f"sum delta_{i} must diverge")
            for j in range(i + 1, self.kmax):
                d_j = self.branches[j].tail.delta.term
                if classify(d_j * e_i) != DIVERGENT:
                    problems.append(f"sum delta_{j}*epsilon_{i} must diverge")
        # probability mass sanity on a probe range
        for n in range(self.n_star, self.n_star + 4 * self.width * self.kmax + 1):
            k = self.k_of(n)
            total = sum(self.delta(i, n) for i in range(k))
            if total > 1:
                problems.append(f"non-top deltas sum to {float(total):.4f} > 1 at n={n}")
                break
            for i in range(k):
                if not 0 < self.epsilon(i, n) < 1:
                    problems.append(f"epsilon_{i}({n}) outside (0,1)")
                    break
        return problems

    def validate(self) -> None:
        problems = self.hypothesis_report()
        if problems:
            raise HypothesisViolated("; ".join(problems))

    def manifest(self) -> dict:
        return {
            "family": self.family,
            "variant": self.variant,
            "name": self.name,
            "n_star": self.n_star,
            "width": self.width,
            "kmax": self.kmax,
            "branches": [
                [
                    {
                        "start": p.start,
                        "end": p.end,
                        "delta": _termspec_dict(p.delta),
                        "epsilon": _termspec_dict(p.epsilon),
                    }
                    for p in spec.pieces
                ]
                for spec in self.branches
            ],
        }


def _termspec_dict(ts: TermSpec) -> dict:
    return {
        "coef": [ts.coef.numerator, ts.coef.denominator],
        "exponents": [[e.numerator, e.denominator] for e in ts.term.exponents],
    }


def _termspec_from_dict(d: dict) -> TermSpec:
    coef = Fraction(*d["coef"])
    exps = [Fraction(*e) for e in d["exponents"]]
    return TermSpec.of(coef, *exps)


Schedule = Union[FaithfulSchedule, RationalizedSchedule, AcceleratedSchedule]


def _m_recurrence(sched, n: int) -> int:
    """Block reward scale; exact integers.

    Variant A: m_n = 2 k(n) * sum of all previous m_i (dwarfs any
    accumulated reward).  Variant B: m_n = sum of previous m_i^{k(n)}
    (dwarfs any accumulated path length).
    """
    cache = sched._m_cache
    if n in cache:
        return cache[n]
    if n < sched.n_star:
        raise OutOfRange(f"m undefined below n_star={sched.n_star}")
    for j in range(sched.n_star, n + 1):
        if j in cache:
            continue
        if j == sched.n_star:
            cache[j] = 1
        elif sched.variant == "A":
            cache[j] = 2 * sched.k_of(j) * sum(cache[i] for i in range(sched.n_star, j))
        else:
            k = sched.k_of(j)
            cache[j] = sum(cache[i] ** k for i in range(sched.n_star, j))
    return cache[n]


# ------------------------------------------------------------------
# Analysis operations


def delta(sched: Schedule, i: int, n: int):
    return sched.delta(i, n)


def epsilon(sched: Schedule, i: int, n: int):
    return sched.epsilon(i, n)


def k_of(sched: Schedule, n: int) -> int:
    return sched.k_of(n)


def m_reward(sched: Schedule, n: int) -> int:
    return sched.m(n)


def partial_survival(sched: Schedule, start: int, blocks: int):
    """Product of (1 - loss(n)) over exactly ``blocks`` blocks.

    Exact Fraction for exact schedules; interval otherwise.
    """
    if sched.exact:
        acc = Fraction(1)
        for n in range(start, start + blocks):
            acc *= 1 - sched.loss(n)
        return acc
    with with_prec(160):
        acc = iv.mpf(1)
        for n in range(start, start + blocks):
            acc = acc * (1 - sched.loss(n))
        return acc


def survival_product(sched: Schedule, start: int, horizon: int) -> Enclosure:
    """Certified enclosure of the infinite product of (1 - loss(n)).

    ``horizon`` blocks are multiplied out; the tail is bracketed by
    [1 - T_hi, exp(-T_lo)] from the certified tail-sum enclosure.
    Raises when the loss series is not summable (deliberately losing
    accelerated schedules).
    """
    M = start + horizon
    t_lo, t_hi = sched.tail_sum_enclosure(M)
    part = partial_survival(sched, start, horizon)
    if sched.exact:
        part_enc = Enclosure.exact(part)
    else:
        part_enc = Enclosure.from_iv(part)
    tail_lo = max(Fraction(0), 1 - t_hi)
    with with_prec(160):
        tail_hi = min(Fraction(1), iv_hi(iv.exp(-iv_from_rat(t_lo))))
    return part_enc * Enclosure(tail_lo, tail_hi)


class DivergentLoss(ValueError):
    pass


def skip_index(sched: Schedule, eps: Fraction) -> int:
    """Least probed start N whose certified tail product is >= 1 - eps.

    Monotone over-approximation of the true minimum: the certificate is
    tail-product >= 1 - T_hi(N) with T_hi the certified tail-sum bound.
    """
    eps = Fraction(eps)
    if eps >= 1:
        return sched.n_star
    n = sched.n_star
    limit = 10 ** 7
    while n <= limit:
        try:
            _, t_hi = sched.tail_sum_enclosure(n)
        except OutOfRange:
            t_hi = Fraction(2)
        if t_hi <= eps:
            # walk back to the least probed index with the property
            lo, hi = sched.n_star, n
            while lo < hi:
                mid = (lo + hi) // 2
                _, t = sched.tail_sum_enclosure(mid)
                if t <= eps:
                    hi = mid
                else:
                    lo = mid + 1
            return hi
        n = max(n + 1, n * 2)
    raise DivergentLoss("certified tail bound never drops below eps")


def confusion_bound(sched: Schedule, n: int, i: int, j: int, alpha: Fraction):
    """Local error floor when branches i < j share a memory mode and the
    higher branch is played with probability alpha."""
    if not 0 <= i < j <= sched.k_of(n) - 1:
        raise OutOfRange(f"need 0 <= i < j <= k(n)-1 at n={n}")
    alpha = Fraction(alpha)
    if not 0 <= alpha <= 1:
        raise OutOfRange("alpha must lie in [0, 1]")
    d_i, d_j = sched.delta(i, n), sched.delta(j, n)
    e_i, e_j = sched.epsilon(i, n), sched.epsilon(j, n)
    return d_j * (alpha * e_j + (1 - alpha) * e_i) + d_i * (alpha + (1 - alpha) * e_i)


def confusion_floor_pair(sched: Schedule, n: int, i: int, j: int):
    """Minimum of the confusion bound over alpha (linear, so an endpoint)."""
    return min(
        confusion_bound(sched, n, i, j, Fraction(0)),
        confusion_bound(sched, n, i, j, Fraction(1)),
    )


def confusion_floor(sched: Schedule, n: int, modes: int):
    """Machine-independent per-block error floor for any strategy with
    at most ``modes`` memory modes: zero until the branching outgrows
    the memory (k(n) >= modes + 2), then the cheapest confused pair."""
    k = sched.k_of(n)
    if k < modes + 2:
        return Fraction(0) if sched.exact else iv.mpf(0)
    best = None
    for i in range(k - 1):
        for j in range(i + 1, k):
            v = confusion_floor_pair(sched, n, i, j)
            if best is None or v < best:
                best = v
    return best


# ------------------------------------------------------------------
# Presets


def _const(coef: Rat) -> TermSpec:
    return TermSpec.of(coef, 0)


def _power(coef: Rat, a0: Rat) -> TermSpec:
    return TermSpec.of(coef, a0)


def _tail_branch(delta: TermSpec, epsilon: TermSpec, start: int) -> BranchSpec:
    return BranchSpec((BranchPiece(start, None, delta, epsilon),))


def accel_survival() -> AcceleratedSchedule:
    """Two-branch schedule with fast-converging per-block loss: the
    workhorse for survival/skip experiments (tight certified tails)."""
    s = AcceleratedSchedule(
        name="accel-survival",
        variant="A",
        n_star=2,
        width=8,
        kmax=2,
        branches=[
            _tail_branch(_power(Fraction(1, 4), 1), _power(Fraction(1, 4), 1), 2),
            _tail_branch(_const(Fraction(1, 4)), _power(Fraction(1, 4), 2), 2),
        ],
    )
    s.validate()
    return s


def accel_confusion() -> AcceleratedSchedule:
    """Six-branch schedule whose finite hot zone (n < 1000) carries fat,
    constant probabilities so that memory-starved strategies accumulate
    fatal risk within a few hundred blocks; the unbounded tail reverts
    to a compliant fractional-power design."""
    hot_end = 1000
    branches = []
    for i in range(6):
        hot = BranchPiece(
            2,
            hot_end,
            _const(Fraction(i + 2, 64)),
            _const(Fraction(1, 4)),
        )
        tail = BranchPiece(
            hot_end,
            None,
            TermSpec.of(Fraction(1, 8), Fraction(5 - i, 5)),
            TermSpec.of(Fraction(1, 8), Fraction(i + 1, 5) if i < 5 else Fraction(6, 5)),
        )
        branches.append(BranchSpec((hot, tail)))
    s = AcceleratedSchedule(
        name="accel-confusion",
        variant="A",
        n_star=2,
        width=5,
        kmax=6,
        branches=branches,
    )
    s.validate()
    return s


def accel_restart() -> AcceleratedSchedule:
    """Three-branch schedule with total loss certified below 1/2, so
    restarting play recovers with per-row failure probability < 1/2."""
    s = AcceleratedSchedule(
        name="accel-restart",
        variant="A",
        n_star=2,
        width=8,
        kmax=3,
        branches=[
            _tail_branch(_power(Fraction(1, 4), 1), TermSpec.of(Fraction(1, 4), Fraction(1, 2)), 2),
            _tail_branch(TermSpec.of(Fraction(1, 4), Fraction(1, 2)), _power(Fraction(1, 4), 1), 2),
            _tail_branch(_const(Fraction(1, 4)), _power(Fraction(1, 4), 2), 2),
        ],
    )
    s.validate()
    return s


def accel_b() -> AcceleratedSchedule:
    """Two-branch B-variant table for the reward-annotated gadgets."""
    s = AcceleratedSchedule(
        name="accel-b",
        variant="B",
        n_star=2,
        width=6,
        kmax=2,
        branches=[
            _tail_branch(_power(Fraction(1, 4), 1), _power(Fraction(1, 4), 1), 2),
            _tail_branch(_const(Fraction(1, 4)), _power(Fraction(1, 4), 2), 2),
        ],
    )
    s.validate()
    return s


_PRESETS = {
    "faithful-a": lambda: FaithfulSchedule("A"),
    "faithful-b": lambda: FaithfulSchedule("B"),
    "rationalized-a": lambda: RationalizedSchedule(FaithfulSchedule("A")),
    "rationalized-b": lambda: RationalizedSchedule(FaithfulSchedule("B")),
    "accel-survival": accel_survival,
    "accel-confusion": accel_confusion,
    "accel-restart": accel_restart,
    "accel-b": accel_b,
}


def schedule_by_name(name: str) -> Schedule:
    if name not in _PRESETS:
        raise KeyError(f"unknown schedule {name!r}; known: {sorted(_PRESETS)}")
    return _PRESETS[name]()


def schedule_from_dict(d: dict) -> Schedule:
    """Load a schedule definition (the on-disk format); validates."""
    family = d["family"]
    if family == "faithful":
        return FaithfulSchedule(d.get("variant", "A"), d.get("name"))
    if family == "rationalized":
        return RationalizedSchedule(FaithfulSchedule(d.get("variant", "A")), d.get("name"))
    if family == "accelerated":
        branches = []
        for pieces in d["branches"]:
            branches.append(
                BranchSpec(
                    tuple(
                        BranchPiece(
                            int(p["start"]),
                            None if p["end"] is None else int(p["end"]),
                            _termspec_from_dict(p["delta"]),
                            _termspec_from_dict(p["epsilon"]),
                        )
                        for p in pieces
                    )
                )
            )
        s = AcceleratedSchedule(
            name=d.get("name", "accelerated"),
            variant=d.get("variant", "A"),
            n_star=int(d["n_star"]),
            width=int(d["width"]),
            kmax=int(d["kmax"]),
            branches=branches,
        )
        s.validate()
        return s
    raise ValueError(f"unknown schedule family {family!r}")
