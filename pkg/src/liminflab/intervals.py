"""Certified interval arithmetic helpers on top of mpmath.iv.

Every quantity derived from an irrational schedule is reported as an
enclosure [lo, hi], never a point.  Endpoints convert exactly to
Fraction, so downstream rational code can consume certified upper or
lower bounds without rounding surprises.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

from mpmath import iv, mp

# Working precision for interval evaluation (bits).  Schedule values and
# tail bounds are nowhere near this sensitive; raised locally when a
# comparison comes out undecided.
DEFAULT_PREC = 120

iv.prec = DEFAULT_PREC

Rat = Union[int, Fraction]


def _tuple_to_fraction(t) -> Fraction:
    sign, man, exp, _ = t
    if man == 0:
        if exp == 0:
            return Fraction(0)
        raise OverflowError("non-finite interval endpoint")
    f = Fraction(int(man)) * Fraction(2) ** int(exp)
    return -f if sign else f


def iv_from_rat(x: Rat):
    """Exact rational -> enclosing interval."""
    if isinstance(x, int):
        return iv.mpf(x)
    return iv.mpf(x.numerator) / iv.mpf(x.denominator)


def iv_lo(x) -> Fraction:
    """Exact lower endpoint of an interval as a Fraction."""
    return _tuple_to_fraction(x._mpi_[0])


def iv_hi(x) -> Fraction:
    """Exact upper endpoint of an interval as a Fraction."""
    return _tuple_to_fraction(x._mpi_[1])


def iv_width(x) -> Fraction:
    return iv_hi(x) - iv_lo(x)


def iv_mid(x) -> Fraction:
    return (iv_lo(x) + iv_hi(x)) / 2


def iv_lt(x, y) -> bool:
    """Certified x < y (strict separation of intervals)."""
    return iv_hi(x) < iv_lo(y)


def iv_le(x, y) -> bool:
    return iv_hi(x) <= iv_lo(y)


def contains(x, value: Rat) -> bool:
    return iv_lo(x) <= Fraction(value) <= iv_hi(x)


class Enclosure:
    """A certified [lo, hi] bracket with exact rational endpoints."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: Rat, hi: Rat):
        lo, hi = Fraction(lo), Fraction(hi)
        if lo > hi:
            raise ValueError(f"empty enclosure [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    @classmethod
    def exact(cls, x: Rat) -> "Enclosure":
        return cls(x, x)

    @classmethod
    def from_iv(cls, x) -> "Enclosure":
        return cls(iv_lo(x), iv_hi(x))

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def __contains__(self, x) -> bool:
        return self.lo <= Fraction(x) <= self.hi

    def __mul__(self, other: "Enclosure") -> "Enclosure":
        ps = (self.lo * other.lo, self.lo * other.hi,
              self.hi * other.lo, self.hi * other.hi)
        return Enclosure(min(ps), max(ps))

    def __repr__(self) -> str:
        return f"Enclosure({float(self.lo)!r}, {float(self.hi)!r})"


def with_prec(prec: int):
    """Context manager temporarily raising interval precision."""

    class _Ctx:
        def __enter__(self):
            self._old = iv.prec
            iv.prec = prec
            return iv

        def __exit__(self, *exc):
            iv.prec = self._old
            return False

    return _Ctx()
