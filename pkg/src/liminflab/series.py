"""Bertrand-class series terms and convergence analysis.

A LogPowerTerm describes term(n) = 1 / (n^a0 * prod_i log_i(n)^a_i)
by its exponent vector.  Convergence of sum term(n) is decided
lexicographically against the all-ones vector, and convergent terms get
certified tail upper bounds via the integral test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Tuple, Union

from mpmath import iv

from .bigexpr import DomainTooSmall, log_iter, tower_int
from .intervals import iv_from_rat, iv_hi, iv_lo, with_prec

Rat = Union[int, Fraction]

CONVERGENT = "Convergent"
DIVERGENT = "Divergent"


class DivergentTerm(ValueError):
    """Tail bound requested for a divergent term."""


@dataclass(frozen=True)
class LogPowerTerm:
    """Exponent vector (a0, a1, ..., ad); trailing zeros are normalized off."""

    exponents: Tuple[Fraction, ...]

    @staticmethod
    def of(*exponents: Rat) -> "LogPowerTerm":
        exps = [Fraction(e) for e in exponents]
        while exps and exps[-1] == 0:
            exps.pop()
        if not exps:
            exps = [Fraction(0)]
        return LogPowerTerm(tuple(exps))

    @property
    def depth(self) -> int:
        """Deepest log level d with a nonzero exponent."""
        return len(self.exponents) - 1

    def n_min(self) -> int:
        """First n with all iterated logs > 1 (term positive, decreasing)."""
        if self.depth == 0:
            return 2
        if self.depth > 3:
            raise OverflowError("n_min beyond numeric range for depth > 3")
        return tower_int(self.depth) + 1

    def __mul__(self, other: "LogPowerTerm") -> "LogPowerTerm":
        a, b = self.exponents, other.exponents
        n = max(len(a), len(b))
        a = a + (Fraction(0),) * (n - len(a))
        b = b + (Fraction(0),) * (n - len(b))
        return LogPowerTerm.of(*(x + y for x, y in zip(a, b)))

    def value(self, n: int, prec: int = 120):
        """Certified interval enclosure of term(n)."""
        if n < self.n_min():
            raise DomainTooSmall(f"term undefined below n_min at n={n}")
        with with_prec(prec):
            acc = iv.mpf(1)
            base = iv_from_rat(n)
            for i, a in enumerate(self.exponents):
                if a == 0:
                    continue
                factor = base if i == 0 else log_iter(i, n, prec)
                acc = acc * _ipow(factor, a)
            return 1 / acc

    def value_float(self, n: int) -> float:
        v = self.value(n)
        return float((iv_lo(v) + iv_hi(v)) / 2)


def _ipow(x, a: Fraction):
    if a.denominator == 1:
        return x ** int(a)
    return iv.exp(iv.log(x) * iv_from_rat(a))


def classify(term: LogPowerTerm) -> str:
    """Bertrand criterion: find the least index j with a_j != 1.

    Convergent iff such j exists within the vector and a_j > 1 (the
    plain p-series rule when j = 0); divergent otherwise, including the
    all-ones vector.
    """
    for a in term.exponents:
        if a != 1:
            return CONVERGENT if a > 1 else DIVERGENT
    return DIVERGENT


def deciding_index(term: LogPowerTerm) -> int:
    """Least index with exponent != 1, or len(vector) when all ones."""
    for j, a in enumerate(term.exponents):
        if a != 1:
            return j
    return len(term.exponents)


def tail_upper_bound(term: LogPowerTerm, N: int, prec: int = 120) -> Fraction:
    """Certified upper bound on sum_{n > N} term(n).

    Uses the integral test after bounding every log factor above the
    deciding index by its value at N; requires those trailing exponents
    to be >= 0 (all schedule terms are of this shape).
    """
    if classify(term) != CONVERGENT:
        raise DivergentTerm(f"no finite tail for {term.exponents}")
    j = deciding_index(term)
    p = term.exponents[j]
    if any(a < 0 for a in term.exponents[j + 1:]):
        raise ValueError("negative exponent above deciding index unsupported")
    if N < term.n_min():
        raise DomainTooSmall(f"tail bound needs N >= {term.n_min()}")
    with with_prec(prec):
        # antiderivative of 1/(x log x ... log_{j-1} x (log_j x)^p)
        # is (log_j x)^(1-p) / (1-p); substitute u = log_j x.
        head = log_iter(j, N, prec) if j > 0 else iv_from_rat(N)
        integral = _ipow(head, 1 - p) / iv_from_rat(p - 1)
        scale = iv.mpf(1)
        for i in range(j + 1, len(term.exponents)):
            a = term.exponents[i]
            if a == 0:
                continue
            scale = scale * _ipow(log_iter(i, N, prec), a)
        return iv_hi(integral / scale)


def tail_lower_bound(term: LogPowerTerm, N: int, prec: int = 120) -> Fraction:
    """Certified lower bound on sum_{n > N} term(n) (integral from N+1)."""
    if classify(term) != CONVERGENT:
        raise DivergentTerm(f"no finite tail for {term.exponents}")
    j = deciding_index(term)
    p = term.exponents[j]
    if any(a < 0 for a in term.exponents[j + 1:]):
        raise ValueError("negative exponent above deciding index unsupported")
    with with_prec(prec):
        # term(x) >= 1/(x log x ... (log_j x)^p * prod_{i>j} log_i x^{a_i})
        # with the trailing factors *increasing*, so no clean lower bound
        # through them; bound the trailing product by its limit behaviour
        # only when absent.  With trailing factors present we integrate
        # the full form numerically via a conservative split.
        if len(term.exponents) > j + 1 and any(a != 0 for a in term.exponents[j + 1:]):
            # conservative: drop to zero (still a valid lower bound)
            return Fraction(0)
        head = log_iter(j, N + 1, prec) if j > 0 else iv_from_rat(N + 1)
        integral = _ipow(head, 1 - p) / iv_from_rat(p - 1)
        return max(Fraction(0), iv_lo(integral))


def partial_sum(term: LogPowerTerm, lo: int, hi: int, prec: int = 120):
    """Enclosure of sum_{n=lo..hi} term(n) by direct evaluation."""
    with with_prec(prec):
        acc = iv.mpf(0)
        for n in range(lo, hi + 1):
            acc = acc + term.value(n, prec)
        return acc


def first_index_with_tail_below(
    term: LogPowerTerm, bound: Fraction, prec: int = 120
) -> int:
    """Least probed N (power-of-two refinement) whose certified tail
    upper bound drops to <= bound.  Over-approximates the true minimum,
    which is all downstream uses need."""
    n = max(term.n_min(), 2)
    while tail_upper_bound(term, n, prec) > bound:
        n *= 2
        if n > 10 ** 9:
            raise OverflowError("tail refuses to drop below bound numerically")
    lo, hi = n // 2, n
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if mid < term.n_min():
            lo = mid
            continue
        if tail_upper_bound(term, mid, prec) <= bound:
            hi = mid
        else:
            lo = mid
    return hi
