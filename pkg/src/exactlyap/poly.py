"""Sparse multivariate polynomials over the rationals.

A polynomial is an immutable mapping from exponent tuples to nonzero
``Fraction`` coefficients.  Variables are positional; names only matter when
parsing or printing.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .exactnum import RationalLike, format_rational, parse_rational, rat

Monomial = tuple[int, ...]

# exponents live in machine words in any sane use; refuse anything larger
MAX_EXPONENT = 2**31 - 1
ZERO_DEGREE = float("-inf")


def _check_exponent(e: int) -> int:
    if e < 0:
        raise ValueError(f"negative exponent {e}")
    if e > MAX_EXPONENT:
        raise OverflowError(f"exponent {e} exceeds {MAX_EXPONENT}")
    return e


def grlex_key(m: Monomial) -> tuple:
    """Basis order: by total degree, then x1 before x2 before ... within a degree."""
    return (sum(m), tuple(-e for e in m))


class Polynomial:
    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping[Monomial, RationalLike] | None = None):
        if nvars < 1:
            raise ValueError("a polynomial needs at least one variable")
        self.nvars = nvars
        clean: dict[Monomial, Fraction] = {}
        for mono, c in (terms or {}).items():
            mono = tuple(mono)
            if len(mono) != nvars:
                raise ValueError(f"monomial {mono} does not have {nvars} entries")
            for e in mono:
                _check_exponent(e)
            c = rat(c)
            if c:
                clean[mono] = clean.get(mono, Fraction(0)) + c
                if not clean[mono]:
                    del clean[mono]
        self._terms = clean
        self._hash = None

    # -- constructors -------------------------------------------------------
    @classmethod
    def _raw(cls, nvars: int, terms: dict[Monomial, Fraction]) -> Polynomial:
        p = object.__new__(cls)
        p.nvars = nvars
        p._terms = terms
        p._hash = None
        return p

    @classmethod
    def zero(cls, nvars: int) -> Polynomial:
        return cls._raw(nvars, {})

    @classmethod
    def const(cls, nvars: int, c: RationalLike) -> Polynomial:
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, i: int, nvars: int) -> Polynomial:
        e = [0] * nvars
        e[i] = 1
        return cls._raw(nvars, {tuple(e): Fraction(1)})

    @classmethod
    def monomial(cls, exps: Sequence[int], coeff: RationalLike = 1) -> Polynomial:
        return cls(len(exps), {tuple(exps): coeff})

    @classmethod
    def variables(cls, nvars: int) -> list[Polynomial]:
        return [cls.var(i, nvars) for i in range(nvars)]

    # -- inspection ---------------------------------------------------------
    @property
    def terms(self) -> dict[Monomial, Fraction]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coeff(self, mono: Monomial) -> Fraction:
        return self._terms.get(tuple(mono), Fraction(0))

    @property
    def support(self) -> frozenset[Monomial]:
        return frozenset(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def total_degree(self):
        if not self._terms:
            return ZERO_DEGREE
        return max(sum(m) for m in self._terms)

    def is_homogeneous(self) -> bool:
        return len({sum(m) for m in self._terms}) <= 1

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        """Terms in printing order: highest degree first, x1-heavy first within a degree."""
        return sorted(self._terms.items(), key=lambda t: (-sum(t[0]), tuple(-e for e in t[0])))

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError(f"variable count mismatch: {self.nvars} vs {other.nvars}")
            return other
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return Polynomial.const(self.nvars, other)
        return NotImplemented

    def __add__(self, other) -> Polynomial:
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            s = out.get(m, 0) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        return Polynomial._raw(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return Polynomial._raw(self.nvars, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> Polynomial:
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> Polynomial:
        return (-self) + other

    def __mul__(self, other) -> Polynomial:
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self.scale(other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, 0) + c1 * c2
        return Polynomial._raw(self.nvars, {m: c for m, c in out.items() if c})

    __rmul__ = __mul__

    def scale(self, c: RationalLike) -> Polynomial:
        c = rat(c)
        if not c:
            return Polynomial.zero(self.nvars)
        return Polynomial._raw(self.nvars, {m: c * v for m, v in self._terms.items()})

    def __pow__(self, k: int) -> Polynomial:
        if k < 0:
            raise ValueError("negative power of a polynomial")
        result = Polynomial.const(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self._terms == other._terms
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self == Polynomial.const(self.nvars, other)
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self._terms.items())))
        return self._hash

    # -- calculus and evaluation -------------------------------------------
    def diff(self, i: int) -> Polynomial:
        out: dict[Monomial, Fraction] = {}
        for m, c in self._terms.items():
            if m[i]:
                e = list(m)
                e[i] -= 1
                out[tuple(e)] = c * m[i]
        return Polynomial._raw(self.nvars, out)

    def to_string(self, names: Sequence[str] | None = None) -> str:
        return poly_print(self, names)

    def __str__(self) -> str:
        return poly_print(self)

    def __repr__(self) -> str:
        return f"Polynomial({self.nvars}, {poly_print(self)!r})"


# ---------------------------------------------------------------------------
# operations in functional form


def poly_arith(a: Polynomial, b: Polynomial, op: str) -> Polynomial:
    if a.nvars != b.nvars:
        raise ValueError(f"variable count mismatch: {a.nvars} vs {b.nvars}")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown operation {op!r}")


def poly_eval(p: Polynomial, point: Sequence[RationalLike]) -> Fraction:
    if len(point) != p.nvars:
        raise ValueError(f"point has {len(point)} coordinates, polynomial has {p.nvars} variables")
    pt = [rat(v) for v in point]
    # cache powers per coordinate
    powers: list[dict[int, Fraction]] = [{0: Fraction(1)} for _ in pt]
    total = Fraction(0)
    for m, c in p.items():
        term = c
        for i, e in enumerate(m):
            if e:
                cache = powers[i]
                if e not in cache:
                    cache[e] = pt[i] ** e
                term *= cache[e]
        total += term
    return total


def poly_gradient(p: Polynomial) -> list[Polynomial]:
    return [p.diff(i) for i in range(p.nvars)]


def dot(u: Sequence[Polynomial], v: Sequence[Polynomial]) -> Polynomial:
    if len(u) != len(v) or not u:
        raise ValueError("dot product of vectors with different or zero length")
    total = Polynomial.zero(u[0].nvars)
    for a, b in zip(u, v):
        total = total + a * b
    return total


def poly_substitute(p: Polynomial, images: Sequence[Polynomial]) -> Polynomial:
    """Compose ``p(images[0], ..., images[n-1])``."""
    if len(images) != p.nvars:
        raise ValueError(f"need {p.nvars} images, got {len(images)}")
    m = images[0].nvars
    if any(g.nvars != m for g in images):
        raise ValueError("images must share one variable count")
    powers: list[dict[int, Polynomial]] = [{0: Polynomial.const(m, 1), 1: g} for g in images]

    def power(i: int, e: int) -> Polynomial:
        cache = powers[i]
        if e not in cache:
            cache[e] = power(i, e // 2) * power(i, e - e // 2)
        return cache[e]

    total = Polynomial.zero(m)
    for mono, c in p.items():
        term = Polynomial.const(m, c)
        for i, e in enumerate(mono):
            if e:
                term = term * power(i, e)
        total = total + term
    return total


@dataclass(frozen=True)
class DegreeInfo:
    total_degree: float | int
    is_homogeneous: bool
    support: frozenset


def poly_degree_info(p: Polynomial) -> DegreeInfo:
    return DegreeInfo(p.total_degree(), p.is_homogeneous(), p.support)


def default_names(nvars: int) -> list[str]:
    return [f"x{i + 1}" for i in range(nvars)]


def _mono_str(m: Monomial, names: Sequence[str]) -> str:
    parts = []
    for name, e in zip(names, m):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts)


def poly_print(p: Polynomial, names: Sequence[str] | None = None) -> str:
    """Canonical text form, terms in descending graded-lex order."""
    names = list(names) if names is not None else default_names(p.nvars)
    if len(names) != p.nvars:
        raise ValueError("wrong number of variable names")
    if p.is_zero():
        return "0"
    out = []
    for i, (m, c) in enumerate(p.sorted_terms()):
        mono = _mono_str(m, names)
        mag = abs(c)
        if not mono:
            body = format_rational(mag)
        elif mag == 1:
            body = mono
        else:
            body = f"{format_rational(mag)}*{mono}"
        if i == 0:
            out.append(("-" if c < 0 else "") + body)
        else:
            out.append((" - " if c < 0 else " + ") + body)
    return "".join(out)


# ---------------------------------------------------------------------------
# parser


class ParseError(ValueError):
    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at position {pos} in {text!r}")
        self.text = text
        self.pos = pos


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            tokens.append(("num", text[i:j], i))
            i = j
        elif ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
        elif ch in "+-*/^()":
            tokens.append((ch, ch, i))
            i += 1
        else:
            raise ParseError(f"unexpected character {ch!r}", text, i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, names: Sequence[str]):
        self.text = text
        self.index = {name: i for i, name in enumerate(names)}
        self.n = len(names)
        self.toks = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.toks[self.k]

    def take(self, kind: str | None = None):
        tok = self.toks[self.k]
        if kind is not None and tok[0] != kind:
            want = "end of input" if kind == "end" else repr(kind)
            raise ParseError(f"expected {want}, found {tok[1] or 'end of input'!r}", self.text, tok[2])
        self.k += 1
        return tok

    def parse(self) -> Polynomial:
        p = self.expr()
        self.take("end")
        return p

    def expr(self) -> Polynomial:
        sign = 1
        if self.peek()[0] in ("+", "-"):
            sign = -1 if self.take()[0] == "-" else 1
        total = self.term().scale(sign)
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            t = self.term()
            total = total + t if op == "+" else total - t
        return total

    def term(self) -> Polynomial:
        p = self.factor()
        while self.peek()[0] == "*":
            self.take()
            p = p * self.factor()
        return p

    def factor(self) -> Polynomial:
        base = self.atom()
        if self.peek()[0] == "^":
            self.take()
            kind, val, pos = self.take()
            if kind != "num" or not val.isdigit():
                raise ParseError("exponent must be a nonnegative integer", self.text, pos)
            e = int(val)
            if e > MAX_EXPONENT:
                raise OverflowError(f"exponent {e} exceeds {MAX_EXPONENT}")
            base = base**e
        return base

    def atom(self) -> Polynomial:
        kind, val, pos = self.peek()
        if kind == "num":
            self.take()
            lit = val
            if self.peek()[0] == "/":
                self.take()
                k2, v2, p2 = self.take()
                if k2 != "num" or not v2.isdigit():
                    raise ParseError("denominator must be a positive integer", self.text, p2)
                if "." in val:
                    raise ParseError("decimal numerator in a fraction literal", self.text, pos)
                if int(v2) == 0:
                    raise ParseError("zero denominator", self.text, p2)
                lit = f"{val}/{v2}"
            return Polynomial.const(self.n, parse_rational(lit))
        if kind == "name":
            self.take()
            if val not in self.index:
                raise ParseError(f"unknown variable {val!r}", self.text, pos)
            return Polynomial.var(self.index[val], self.n)
        if kind == "(":
            self.take()
            p = self.expr()
            self.take(")")
            return p
        raise ParseError(f"unexpected {val or 'end of input'!r}", self.text, pos)


def poly_parse(text: str, names: Sequence[str]) -> Polynomial:
    """Parse an ASCII polynomial expression over the given variable names."""
    if not names:
        raise ValueError("at least one variable name is required")
    return _Parser(text, names).parse()


def monomials_of_degree(nvars: int, degree: int) -> list[Monomial]:
    """All exponent vectors of total degree ``degree``, ascending grlex."""
    out: list[Monomial] = []

    def rec(prefix: list[int], left: int, slots: int):
        if slots == 1:
            out.append(tuple(prefix + [left]))
            return
        for e in range(left + 1):
            rec(prefix + [e], left - e, slots - 1)

    rec([], degree, nvars)
    return sorted(out, key=grlex_key)


def sum_of_even_powers(nvars: int, monos: Iterable[Monomial]) -> Polynomial:
    """The polynomial sum of x^(2*alpha) over the given alphas."""
    return Polynomial(nvars, {tuple(2 * e for e in a): 1 for a in monos})
