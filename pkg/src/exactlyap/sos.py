"""Gram matrices, exact weighted SOS certificates and the rounding procedure.

``intsos`` turns a floating-point Gram matrix into an exact identity
``g = sum c_i s_i^2`` with nonnegative rational ``c_i`` and rational
polynomials ``s_i``: perturb ``g`` by ``eps * sum x^(2a)``, solve the Gram
SDP, round an LDL^T factorisation, and absorb the exact (small) remainder
into the perturbation budget.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .exactnum import float_to_dyadic, rat
from .poly import Monomial, Polynomial, grlex_key, monomials_of_degree, poly_print
from .sdp import Constraint, SdpError, SdpProblem, ldl_decompose, sdp_solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MonomialBasis:
    nvars: int
    monomials: tuple[Monomial, ...]
    kind: str = "full"

    def __post_init__(self):
        if len(set(self.monomials)) != len(self.monomials):
            raise ValueError("duplicate monomials in basis")
        if any(len(m) != self.nvars for m in self.monomials):
            raise ValueError("basis monomial of wrong length")

    def __len__(self) -> int:
        return len(self.monomials)

    def __iter__(self):
        return iter(self.monomials)

    def polys(self) -> list[Polynomial]:
        return [Polynomial.monomial(m) for m in self.monomials]


def basis_for(nvars: int, degree: int, kind: str = "full") -> MonomialBasis:
    """Monomials of degree <= ``degree`` (full) or exactly ``degree`` (homogeneous), grlex order."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    if kind == "full":
        monos = [m for d in range(degree + 1) for m in monomials_of_degree(nvars, d)]
    elif kind == "homogeneous":
        monos = monomials_of_degree(nvars, degree)
    else:
        raise ValueError(f"unknown basis kind {kind!r}")
    return MonomialBasis(nvars, tuple(monos), kind)


def _in_hull(point: Sequence[int], pts: np.ndarray) -> bool:
    k = len(pts)
    A_eq = np.vstack([pts.T, np.ones(k)])
    b_eq = np.concatenate([np.asarray(point, float), [1.0]])
    res = linprog(np.zeros(k), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return res.status == 0


def newton_basis(g: Polynomial) -> MonomialBasis:
    """Half Newton polytope of ``g``, then diagonal-consistency pruning.

    Only monomials in this set can carry nonzero Gram entries for ``g``, so
    a Gram matrix over the reduced basis can be positive definite even when
    ``g`` lacks full support.
    """
    deg = g.total_degree()
    if g.is_zero() or deg % 2:
        raise ValueError("Newton basis needs a nonzero polynomial of even degree")
    d = deg // 2
    homog = g.is_homogeneous()
    start = basis_for(g.nvars, d, "homogeneous" if homog else "full")
    pts = np.array(sorted(g.support), dtype=float)
    keep = [a for a in start if _in_hull([2 * e for e in a], pts)]
    supp = g.support
    changed = True
    while changed:
        changed = False
        kept = set(keep)
        for a in list(keep):
            two_a = tuple(2 * e for e in a)
            if two_a in supp:
                continue
            ok = False
            for b in kept:
                c = tuple(x - y for x, y in zip(two_a, b))
                if min(c) >= 0 and c != b and c in kept:
                    ok = True
                    break
            if not ok:
                keep.remove(a)
                changed = True
                break
    return MonomialBasis(g.nvars, tuple(sorted(keep, key=grlex_key)), "homogeneous" if homog else "newton")


# ---------------------------------------------------------------------------
# Gram constraints


class InexpressibleMonomial(ValueError):
    def __init__(self, mono: Monomial):
        super().__init__(f"monomial {poly_print(Polynomial.monomial(mono))} is not expressible in the basis")
        self.monomial = mono


@dataclass
class GramEquality:
    monomial: Monomial
    entries: dict[tuple[int, int], int]  # (i, j) with i <= j -> multiplicity
    rhs: Fraction


def gram_products(basis: MonomialBasis) -> dict[Monomial, dict[tuple[int, int], int]]:
    out: dict[Monomial, dict[tuple[int, int], int]] = {}
    for i, j in combinations_with_replacement(range(len(basis)), 2):
        m = tuple(a + b for a, b in zip(basis.monomials[i], basis.monomials[j]))
        out.setdefault(m, {})[(i, j)] = 1 if i == j else 2
    return out


def gram_constraints(g: Polynomial, basis: MonomialBasis) -> list[GramEquality]:
    """One equality per product monomial: Gram entries summing to g's coefficient."""
    if g.nvars != basis.nvars:
        raise ValueError("polynomial and basis disagree on the variable count")
    prods = gram_products(basis)
    for m in sorted(g.support, key=grlex_key):
        if m not in prods:
            raise InexpressibleMonomial(m)
    return [GramEquality(m, prods[m], g.coeff(m)) for m in sorted(prods, key=grlex_key)]


def gram_problem(g: Polynomial, basis: MonomialBasis) -> SdpProblem:
    cons = [
        Constraint({(0, i, j): float(c) for (i, j), c in eq.entries.items()}, rhs=float(eq.rhs))
        for eq in gram_constraints(g, basis)
    ]
    return SdpProblem([len(basis)], 0, cons)


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class WeightedSosCertificate:
    weights: tuple[Fraction, ...]
    squares: tuple[Polynomial, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(rat(c) for c in self.weights))
        object.__setattr__(self, "squares", tuple(self.squares))
        if len(self.weights) != len(self.squares):
            raise ValueError("weights and squares differ in length")
        if any(c < 0 for c in self.weights):
            raise ValueError("certificate weights must be nonnegative")
        if len({s.nvars for s in self.squares}) > 1:
            raise ValueError("squares disagree on the variable count")

    def __len__(self) -> int:
        return len(self.weights)

    def assemble(self, nvars: int | None = None) -> Polynomial:
        if nvars is None:
            if not self.squares:
                raise ValueError("empty certificate needs an explicit variable count")
            nvars = self.squares[0].nvars
        total = Polynomial.zero(nvars)
        for c, s in zip(self.weights, self.squares):
            if c:
                total = total + (s * s).scale(c)
        return total

    def __add__(self, other: WeightedSosCertificate) -> WeightedSosCertificate:
        return WeightedSosCertificate(self.weights + other.weights, self.squares + other.squares)

    def scaled(self, c: Fraction) -> WeightedSosCertificate:
        """Certificate for ``c * g`` (``c >= 0``)."""
        return WeightedSosCertificate(tuple(c * w for w in self.weights), self.squares)

    def pruned(self) -> WeightedSosCertificate:
        """Drop zero terms and merge repeated squares (up to sign)."""
        merged: dict[Polynomial, Fraction] = {}
        for c, s in zip(self.weights, self.squares):
            if not c or s.is_zero():
                continue
            if s.sorted_terms()[0][1] < 0:
                s = -s
            merged[s] = merged.get(s, Fraction(0)) + c
        return WeightedSosCertificate(tuple(merged.values()), tuple(merged))


@dataclass(frozen=True)
class Verification:
    difference: Polynomial  # g - sum c_i s_i^2

    @property
    def exact(self) -> bool:
        return self.difference.is_zero()

    def __bool__(self) -> bool:
        return self.exact


def verify_certificate(g: Polynomial, cert: WeightedSosCertificate) -> Verification:
    if any(s.nvars != g.nvars for s in cert.squares):
        raise ValueError("certificate and polynomial disagree on the variable count")
    if any(c < 0 for c in cert.weights):
        raise ValueError("negative weight in certificate")
    return Verification(g - cert.assemble(g.nvars))


def extract_squares(G: np.ndarray, basis: MonomialBasis, delta_c: int) -> WeightedSosCertificate:
    """Weighted squares from ``G = L D L^T``, all numbers rounded to multiples of 2^-delta_c."""
    L, D = ldl_decompose(np.asarray(G, float))
    weights, squares = [], []
    for i in range(len(basis)):
        w = float_to_dyadic(max(D[i], 0.0), delta_c)
        terms = {}
        for j in range(i, len(basis)):
            c = Fraction(1) if j == i else float_to_dyadic(L[j, i], delta_c)
            if c:
                terms[basis.monomials[j]] = c
        weights.append(w)
        squares.append(Polynomial(basis.nvars, terms))
    return WeightedSosCertificate(tuple(weights), tuple(squares))


# ---------------------------------------------------------------------------
# absorption


class AbsorptionFailure(Exception):
    def __init__(self, monomial: Monomial, budget: Fraction):
        super().__init__(
            f"perturbation budget at {poly_print(Polynomial.monomial(tuple(2 * e for e in monomial)))} "
            f"exhausted (would be {budget})"
        )
        self.monomial = monomial
        self.budget = budget


def _balanced_split(beta: Monomial) -> tuple[Monomial, Monomial]:
    hi, lo, give_hi = [], [], True
    for e in beta:
        h = e // 2
        if e % 2:
            if give_hi:
                hi.append(h + 1)
                lo.append(h)
            else:
                hi.append(h)
                lo.append(h + 1)
            give_hi = not give_hi
        else:
            hi.append(h)
            lo.append(h)
    return tuple(hi), tuple(lo)


def _split(beta: Monomial, members: set[Monomial], order: Sequence[Monomial]) -> tuple[Monomial, Monomial] | None:
    a, b = _balanced_split(beta)
    if a in members and b in members:
        return a, b
    for a in order:
        if all(x >= y for x, y in zip(beta, a)):
            b = tuple(x - y for x, y in zip(beta, a))
            if b in members and a != b:
                return a, b
    return None


def absorb(u: Polynomial, eps: Fraction, basis: MonomialBasis) -> WeightedSosCertificate:
    """Certificate for ``u + eps * sum_{a in basis} x^(2a)``.

    Each non-even term ``c x^b`` with ``b = b1 + b2`` becomes
    ``|c|/2 (x^b1 + sign(c) x^b2)^2`` minus ``|c|/2`` from the budgets at
    ``x^(2 b1)`` and ``x^(2 b2)``; even terms move their budget directly.
    Raises ``AbsorptionFailure`` on the first budget that goes negative.
    """
    eps = rat(eps)
    members = set(basis.monomials)
    budget: dict[Monomial, Fraction] = {a: eps for a in basis.monomials}
    weights: list[Fraction] = []
    squares: list[Polynomial] = []
    n = basis.nvars
    for beta, c in sorted(u.items(), key=lambda t: grlex_key(t[0])):
        if all(e % 2 == 0 for e in beta):
            a = tuple(e // 2 for e in beta)
            if a in budget:
                budget[a] += c
            elif c > 0:
                weights.append(c)
                squares.append(Polynomial.monomial(a))
            else:
                raise AbsorptionFailure(a, c)
            continue
        pair = _split(beta, members, basis.monomials)
        if pair is None:
            raise AbsorptionFailure(_balanced_split(beta)[0], Fraction(0))
        a1, a2 = pair
        half = abs(c) / 2
        sign = 1 if c > 0 else -1
        weights.append(half)
        squares.append(Polynomial(n, {a1: 1, a2: sign}))
        budget[a1] -= half
        budget[a2] -= half
    for a in basis.monomials:
        if budget[a] < 0:
            raise AbsorptionFailure(a, budget[a])
    for a in basis.monomials:
        if budget[a]:
            weights.append(budget[a])
            squares.append(Polynomial.monomial(a))
    return WeightedSosCertificate(tuple(weights), tuple(squares))


# ---------------------------------------------------------------------------
# intsos


class IntsosFailure(Exception):
    pass


@dataclass
class IntsosParams:
    eps: Fraction | None = None  # None: derived from g
    delta: int = 30
    delta_c: int = 30
    max_rounds: int = 8
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.eps is not None:
            self.eps = rat(self.eps)
            if self.eps <= 0:
                raise ValueError("eps must be positive")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")
        if self.delta < 1 or self.delta_c < 1:
            raise ValueError("precisions must be at least 1")


def default_eps(g: Polynomial) -> Fraction:
    smallest = min((abs(c) for _, c in g.items()), default=Fraction(1))
    return min(smallest, Fraction(1)) / 16


def intsos(g: Polynomial, params: IntsosParams | None = None, basis: MonomialBasis | None = None) -> WeightedSosCertificate:
    """Exact rational weighted SOS decomposition of ``g``.

    The returned certificate always satisfies ``verify_certificate(g, .)``;
    ``IntsosFailure`` is raised when ``max_rounds`` perturbation/absorption
    rounds do not produce one.
    """
    params = params or IntsosParams()
    if g.is_zero():
        return WeightedSosCertificate((), ())
    deg = g.total_degree()
    if deg % 2:
        raise ValueError(f"intsos needs an even-degree polynomial, got degree {deg}")
    if basis is None:
        basis = newton_basis(g)
    if not len(basis):
        raise IntsosFailure("empty Gram basis: polynomial cannot be a sum of squares")
    eps = params.eps if params.eps is not None else default_eps(g)
    delta, delta_c = params.delta, params.delta_c
    shift = Polynomial(g.nvars, {tuple(2 * e for e in a): 1 for a in basis})
    try:
        gram_constraints(g, basis)
    except InexpressibleMonomial as exc:
        raise IntsosFailure(str(exc)) from exc

    last = "no rounds run"
    for rnd in range(params.max_rounds):
        t = g - shift.scale(eps)
        try:
            sol = sdp_solve(gram_problem(t, basis), tol=max(2.0**-delta, 1e-11))
            ok = sol.slack > 0
            last = f"round {rnd}: Gram slack {sol.slack:.3e}"
        except SdpError as exc:
            ok = False
            last = f"round {rnd}: {exc}"
        if ok:
            G = sol.blocks[0]
            Gr = np.array([[float(float_to_dyadic(x, delta)) for x in row] for row in G])
            Gr = 0.5 * (Gr + Gr.T)
            try:
                approx = extract_squares(Gr, basis, delta_c)
                u = t - approx.assemble(g.nvars)
                rest = absorb(u, eps, basis)
                cert = (approx + rest).pruned()
                if not verify_certificate(g, cert).exact:  # pragma: no cover - absorb is exact by construction
                    raise IntsosFailure("internal error: assembled certificate does not match")
                params.history.append(last)
                return cert
            except AbsorptionFailure as exc:
                last = f"round {rnd}: {exc}"
            except ValueError as exc:
                last = f"round {rnd}: {exc}"
        params.history.append(last)
        log.debug("intsos %s; retrying", last)
        eps = eps / 2
        delta += 1
        delta_c += 1
    raise IntsosFailure(f"no exact decomposition after {params.max_rounds} rounds ({last})")
