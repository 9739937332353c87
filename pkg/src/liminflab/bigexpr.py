"""Symbolic iterated-exponential numbers.

The gadget parameter functions live at tower-of-exponentials scale, far
beyond floating point.  BigExpr represents monotone exponential towers
over rationals (literals and e^x nodes), supports decidable comparison
within that grammar, and attaches a certified numeric enclosure whenever
the value is representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from mpmath import iv

from .intervals import iv_from_rat, iv_hi, iv_lo, with_prec

Rat = Union[int, Fraction]

# e^x with x beyond this magnitude is kept symbolic: the exponent field
# of the enclosure would itself stop fitting in memory a level later.
_NUMERIC_ARG_LIMIT = 10 ** 8


class DomainTooSmall(ValueError):
    """Raised when an iterated log would leave the positive reals."""


@dataclass(frozen=True)
class BigExpr:
    """Either a rational literal or e**arg for another BigExpr."""

    value: Optional[Fraction]  # set iff literal
    arg: Optional["BigExpr"]  # set iff exponential node

    @staticmethod
    def of(x: Rat) -> "BigExpr":
        return BigExpr(Fraction(x), None)

    @staticmethod
    def exp(x: Union["BigExpr", Rat]) -> "BigExpr":
        if not isinstance(x, BigExpr):
            x = BigExpr.of(x)
        return BigExpr(None, x)

    @property
    def is_literal(self) -> bool:
        return self.value is not None

    def height(self) -> int:
        """Number of stacked exponentials."""
        h, node = 0, self
        while not node.is_literal:
            h += 1
            node = node.arg
        return h

    def numeric(self, prec: int = 120):
        """Certified enclosure, or None when out of numeric range."""
        with with_prec(prec):
            if self.is_literal:
                return iv_from_rat(self.value)
            inner = self.arg.numeric(prec)
            if inner is None:
                return None
            if iv_hi(inner) > _NUMERIC_ARG_LIMIT:
                return None
            return iv.exp(inner)

    def __float__(self) -> float:
        enc = self.numeric()
        if enc is None:
            raise OverflowError("BigExpr out of numeric range")
        return float((iv_lo(enc) + iv_hi(enc)) / 2)

    # Comparison: peel exponentials, taking logs of literals as needed.
    # e^x is irrational for rational x != 0, so literal/exponential ties
    # cannot occur and interval refinement always separates.

    def compare(self, other: "BigExpr") -> int:
        return _compare(self, other)

    def __lt__(self, other):
        return _compare(self, _coerce(other)) < 0

    def __le__(self, other):
        return _compare(self, _coerce(other)) <= 0

    def __gt__(self, other):
        return _compare(self, _coerce(other)) > 0

    def __ge__(self, other):
        return _compare(self, _coerce(other)) >= 0

    def eq_value(self, other) -> bool:
        return _compare(self, _coerce(other)) == 0

    def __repr__(self) -> str:
        if self.is_literal:
            return f"BigExpr({self.value})"
        return f"exp({self.arg!r})"


def _coerce(x) -> BigExpr:
    if isinstance(x, BigExpr):
        return x
    return BigExpr.of(x)


def _compare(a: BigExpr, b: BigExpr, prec: int = 120) -> int:
    if a.is_literal and b.is_literal:
        return (a.value > b.value) - (a.value < b.value)
    if not a.is_literal and not b.is_literal:
        return _compare(a.arg, b.arg, prec)
    if a.is_literal:
        return -_compare(b, a, prec)
    # a = e^x, b literal c: e^x > 0 always; compare x with ln c.
    c = b.value
    if c <= 0:
        return 1
    if c == 1:
        z = BigExpr.of(0)
        return _compare(a.arg, z, prec)
    return _compare_expr_log(a.arg, c, prec)


def _compare_expr_log(x: BigExpr, c: Fraction, prec: int) -> int:
    """Sign of x - ln(c) for rational c > 0, c != 1."""
    for p in (prec, 4 * prec, 32 * prec):
        with with_prec(p):
            lnc = iv.log(iv_from_rat(c))
            xv = x.numeric(p)
            if xv is not None:
                if iv_hi(xv) < iv_lo(lnc):
                    return -1
                if iv_lo(xv) > iv_hi(lnc):
                    return 1
                continue  # refine
            # x itself is a huge tower: certainly exceeds any literal log
            # whose magnitude fits in an interval.
            return 1
    raise ArithmeticError(f"comparison undecided: {x!r} vs ln({c})")


def tower(i: int) -> BigExpr:
    """Iterated exponential: tower(0) = 1, tower(i+1) = e^tower(i)."""
    if i < 0:
        raise ValueError("tower index must be >= 0")
    node = BigExpr.of(1)
    for _ in range(i):
        node = BigExpr.exp(node)
    return node


def tower_int(i: int) -> int:
    """Smallest integer >= tower(i); numeric-range towers only."""
    enc = tower(i).numeric()
    if enc is None:
        raise OverflowError(f"tower({i}) exceeds numeric range")
    return ceil_certified(enc)


def ceil_certified(enc) -> int:
    """Exact ceiling of an interval; refuses straddled integers."""
    lo, hi = iv_lo(enc), iv_hi(enc)
    c_lo, c_hi = math.ceil(lo), math.ceil(hi)
    if c_lo != c_hi:
        raise ArithmeticError("interval straddles an integer; raise precision")
    return c_lo


def log_iter(i: int, x, prec: int = 120):
    """i-fold natural log.  Accepts ints, Fractions, intervals, BigExpr.

    Returns an interval enclosure (or a BigExpr when the input is a
    literal-free tower that peels exactly).
    """
    if i < 0:
        raise ValueError("log iteration count must be >= 0")
    if isinstance(x, BigExpr):
        node = x
        while i > 0 and not node.is_literal:
            node = node.arg
            i -= 1
        if i == 0:
            return node if not node.is_literal else node.numeric(prec)
        x = node.value
    with with_prec(prec):
        if isinstance(x, (int, Fraction)):
            if x <= 0:
                raise DomainTooSmall(f"log of non-positive value {x}")
            val = iv_from_rat(x)
        else:
            val = x
        for _ in range(i):
            if iv_lo(val) <= 0:
                raise DomainTooSmall("iterated log left the positive reals")
            val = iv.log(val)
        return val
