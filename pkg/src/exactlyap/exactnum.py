"""Exact rational arithmetic.

Python's ``int`` already is an arbitrary-precision integer and
``fractions.Fraction`` keeps numerator/denominator reduced with a positive
denominator, so ``Rational`` is simply ``Fraction``. This module adds the few
operations the rest of the package needs on top: a three-way comparison,
dyadic rounding and a literal parser that accepts decimal notation exactly.
"""
from __future__ import annotations

import enum
import math
import re
from fractions import Fraction
from typing import Union

Rational = Fraction
RationalLike = Union[Fraction, int, str]

_LITERAL = re.compile(r"^\s*([+-]?)(\d+)(?:(/)(\d+)|\.(\d*))?\s*$")


class Cmp(enum.IntEnum):
    LT = -1
    EQ = 0
    GT = 1


def rat(value: RationalLike, den: int | None = None) -> Fraction:
    """Build a reduced rational from an int, Fraction or text literal."""
    if den is not None:
        if den == 0:
            raise ZeroDivisionError("rational with zero denominator")
        return Fraction(int(value), den)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a rational")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return parse_rational(value)
    raise TypeError(f"cannot convert {type(value).__name__} to a rational")


def parse_rational(text: str) -> Fraction:
    """Parse ``-3``, ``223/100`` or ``1.115`` into an exact fraction."""
    m = _LITERAL.match(text)
    if m is None:
        raise ValueError(f"malformed rational literal: {text!r}")
    sign, whole, slash, den, frac = m.groups()
    if slash:
        d = int(den)
        if d == 0:
            raise ZeroDivisionError(f"zero denominator in {text!r}")
        value = Fraction(int(whole), d)
    elif frac is not None:
        value = Fraction(int(whole + frac) if frac else int(whole), 10 ** len(frac))
    else:
        value = Fraction(int(whole))
    return -value if sign == "-" else value


def format_rational(a: Fraction) -> str:
    if a.denominator == 1:
        return str(a.numerator)
    return f"{a.numerator}/{a.denominator}"


def rat_arith(a: Fraction, b: Fraction, op: str) -> Fraction:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if b == 0:
            raise ZeroDivisionError("rational division by zero")
        return a / b
    raise ValueError(f"unknown operation {op!r}")


def rat_cmp(a: Fraction, b: Fraction) -> Cmp:
    d = a.numerator * b.denominator - b.numerator * a.denominator
    return Cmp((d > 0) - (d < 0))


def rat_round_dyadic(a: Fraction, p: int) -> Fraction:
    """Nearest multiple of 2^-p, ties broken toward zero."""
    if p < 0:
        raise ValueError("precision must be nonnegative")
    scaled = abs(a) * (1 << p)
    k = scaled.numerator // scaled.denominator
    if scaled - k > Fraction(1, 2):
        k += 1
    if a < 0:
        k = -k
    return Fraction(k, 1 << p)


def float_to_dyadic(x: float, p: int) -> Fraction:
    """Round a finite double to the nearest multiple of 2^-p (exactly)."""
    if not math.isfinite(x):
        raise ValueError(f"cannot round non-finite value {x}")
    return rat_round_dyadic(Fraction(x), p)


def ceil_log2(a: Fraction) -> int:
    """Smallest integer t with a <= 2^t, for a > 0."""
    if a <= 0:
        raise ValueError("ceil_log2 needs a positive argument")
    n, d = a.numerator, a.denominator
    # first guess from bit lengths, then fix up exactly
    t = n.bit_length() - d.bit_length()
    while Fraction(2) ** t < a:
        t += 1
    while Fraction(2) ** (t - 1) >= a:
        t -= 1
    return t


def pow2(e: int) -> Fraction:
    return Fraction(1 << e) if e >= 0 else Fraction(1, 1 << -e)
