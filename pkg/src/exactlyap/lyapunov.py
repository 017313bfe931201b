"""Synthesis and checking of exact SOS Lyapunov certificates.

For a system with equilibrium at the origin we look for a homogeneous
``V`` of degree ``2k`` such that ``V`` and the (denominator-cleared)
decrease along trajectories are sums of squares.  The SDP picks ``V``
numerically; ``V`` is then rounded to rationals, the decrease is recomputed
exactly and both are handed to ``intsos``.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exactnum import float_to_dyadic, format_rational, pow2
from .poly import Monomial, Polynomial, default_names, grlex_key, monomials_of_degree, poly_eval, poly_print
from .sdp import Constraint, SdpError, SdpProblem, sdp_solve
from .sos import (
    IntsosFailure,
    IntsosParams,
    MonomialBasis,
    WeightedSosCertificate,
    basis_for,
    gram_products,
    intsos,
    newton_basis,
    verify_certificate,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolySystem:
    """``x' = p(x)/q(x)`` (continuous) or ``x+ = p(x)/q(x)`` (discrete), componentwise."""

    numerators: tuple[Polynomial, ...]
    denominators: tuple[Polynomial, ...]
    mode: str = "continuous"
    names: tuple[str, ...] = ()

    def __post_init__(self):
        nums = tuple(self.numerators)
        n = len(nums)
        dens = tuple(self.denominators) if self.denominators else tuple(Polynomial.const(n, 1) for _ in nums)
        object.__setattr__(self, "numerators", nums)
        object.__setattr__(self, "denominators", dens)
        object.__setattr__(self, "names", tuple(self.names) or tuple(default_names(n)))
        if self.mode not in ("continuous", "discrete"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if n == 0 or len(dens) != n or len(self.names) != n:
            raise ValueError("need one numerator, denominator and name per variable")
        if any(p.nvars != n for p in nums + dens):
            raise ValueError(f"every right-hand side must use exactly {n} variables")
        zero = [0] * n
        for i, (p, q) in enumerate(zip(nums, dens)):
            if q.is_zero():
                raise ValueError(f"denominator of equation {i + 1} is zero")
            if poly_eval(q, zero) <= 0:
                raise ValueError(f"denominator of equation {i + 1} is not positive at the origin")
            if poly_eval(p, zero) != 0:
                raise ValueError(f"equation {i + 1} does not vanish at the origin")

    @classmethod
    def polynomial(cls, rhs: Sequence[Polynomial], mode: str = "continuous", names: Sequence[str] = ()) -> PolySystem:
        return cls(tuple(rhs), (), mode, tuple(names))

    @property
    def nvars(self) -> int:
        return len(self.numerators)

    def is_polynomial(self) -> bool:
        one = Polynomial.const(self.nvars, 1)
        return all(q == one for q in self.denominators)

    def max_degree(self) -> int:
        return max(int(max(p.total_degree(), 0)) for p in self.numerators)


# ---------------------------------------------------------------------------
# decrease polynomial


def _distinct(polys: Sequence[Polynomial]) -> list[Polynomial]:
    out: list[Polynomial] = []
    for q in polys:
        if q not in out:
            out.append(q)
    return out


def decrease_polynomial(sys: PolySystem, V: Polynomial) -> tuple[Polynomial, Polynomial]:
    """Return ``(decrease, multiplier)``; both exact polynomials.

    continuous: ``multiplier * (-grad V . f)`` with multiplier the product of
    the distinct denominators.  discrete: ``multiplier * (V - V o f)`` with
    multiplier ``prod q_i^D``, ``D = deg V``.
    """
    n = sys.nvars
    if V.nvars != n:
        raise ValueError(f"V has {V.nvars} variables, system has {n}")
    one = Polynomial.const(n, 1)
    if sys.mode == "continuous":
        dens = _distinct(sys.denominators)
        multiplier = one
        for q in dens:
            multiplier = multiplier * q
        total = Polynomial.zero(n)
        for i, (p, q) in enumerate(zip(sys.numerators, sys.denominators)):
            dVi = V.diff(i)
            if dVi.is_zero():
                continue
            others = one
            for r in dens:
                if r != q:
                    others = others * r
            total = total - dVi * p * others
        return total, multiplier

    if V.is_zero():
        return Polynomial.zero(n), one
    D = int(V.total_degree())
    multiplier = one
    for q in sys.denominators:
        multiplier = multiplier * q**D
    num_pow = [{0: one} for _ in range(n)]
    den_pow = [{0: one} for _ in range(n)]

    def pw(cache, base, e):
        if e not in cache:
            cache[e] = base**e
        return cache[e]

    composed = Polynomial.zero(n)
    for beta, c in V.items():
        term = Polynomial.const(n, c)
        for i, e in enumerate(beta):
            if e:
                term = term * pw(num_pow[i], sys.numerators[i], e)
            if D - e:
                term = term * pw(den_pow[i], sys.denominators[i], D - e)
        composed = composed + term
    return multiplier * V - composed, multiplier


def pure_power_shift(p: Polynomial) -> Polynomial | None:
    """``sum_i x_i^(2 m_i)`` with the smallest positive-coefficient pure even power of each variable.

    ``None`` when some variable has no such power (then ``p`` cannot be
    certified positive definite by subtracting this shift).
    """
    n = p.nvars
    terms = {}
    for i in range(n):
        best = None
        for m, c in p.items():
            if c > 0 and m[i] > 0 and m[i] % 2 == 0 and all(e == 0 for j, e in enumerate(m) if j != i):
                if best is None or m[i] < best:
                    best = m[i]
        if best is None:
            return None
        e = [0] * n
        e[i] = best
        terms[tuple(e)] = 1
    return Polynomial(n, terms)


def form_shift(nvars: int, k: int) -> Polynomial:
    """``sum_{|a| = k} x^(2a)``."""
    return Polynomial(nvars, {tuple(2 * e for e in a): 1 for a in monomials_of_degree(nvars, k)})


# ---------------------------------------------------------------------------
# SDP set-up


class OddDecreaseDegree(ValueError):
    pass


@dataclass
class LyapunovSdp:
    problem: SdpProblem
    k: int
    basis_V: MonomialBasis
    basis_D: MonomialBasis
    v_monomials: tuple[Monomial, ...]  # free variable order
    decrease_map: dict[Monomial, Polynomial]  # V monomial -> its decrease
    forced_zero: dict[Monomial, dict[int, Fraction]]  # decrease monomials outside basis_D products

    @property
    def dims(self) -> list[int]:
        return self.problem.blocks


def decrease_support(sys: PolySystem, k: int) -> tuple[dict[Monomial, Polynomial], int]:
    monos = monomials_of_degree(sys.nvars, 2 * k)
    dmap = {m: decrease_polynomial(sys, Polynomial.monomial(m))[0] for m in monos}
    deg = max((int(d.total_degree()) for d in dmap.values() if not d.is_zero()), default=0)
    return dmap, deg


def setup_sdp_k(sys: PolySystem, k: int, basis_D: MonomialBasis | None = None) -> LyapunovSdp:
    """Blocks ``G1`` over the degree-k monomials and ``G2`` over ``basis_D``.

    Free variables are the coefficients of ``V``.  Without ``basis_D`` the
    full basis of degree ``l = deg(decrease)/2`` is used.  A trace
    normalisation ``tr G1 = dim G1`` removes the scaling freedom.
    """
    if k < 1:
        raise ValueError("half degree k must be positive")
    n = sys.nvars
    dmap, deg = decrease_support(sys, k)
    if deg % 2:
        raise OddDecreaseDegree(f"decrease has odd degree {deg} for k={k}")
    if basis_D is None:
        basis_D = basis_for(n, deg // 2, "full")
    basis_V = basis_for(n, k, "homogeneous")
    vmon = tuple(monomials_of_degree(n, 2 * k))
    vidx = {m: i for i, m in enumerate(vmon)}

    cons: list[Constraint] = []
    for m, entries in sorted(gram_products(basis_V).items(), key=lambda t: grlex_key(t[0])):
        cons.append(Constraint({(0, i, j): float(c) for (i, j), c in entries.items()}, {vidx[m]: -1.0}, 0.0))

    lin: dict[Monomial, dict[int, Fraction]] = {}
    for beta, d in dmap.items():
        for m, c in d.items():
            lin.setdefault(m, {})[vidx[beta]] = c
    prods = gram_products(basis_D)
    forced = {}
    for m in sorted(set(prods) | set(lin), key=grlex_key):
        coeffs = {j: c for j, c in lin.get(m, {}).items() if c}
        entries = prods.get(m, {})
        if not entries:
            if coeffs:
                forced[m] = coeffs
            else:
                continue
        cons.append(
            Constraint(
                {(1, i, j): float(c) for (i, j), c in entries.items()},
                {j: -float(c) for j, c in coeffs.items()},
                0.0,
            )
        )
    cons.append(Constraint({(0, i, i): 1.0 for i in range(len(basis_V))}, {}, float(len(basis_V))))
    prob = SdpProblem([len(basis_V), len(basis_D)], len(vmon), cons)
    return LyapunovSdp(prob, k, basis_V, basis_D, vmon, dmap, forced)


def _candidate_basis(sys: PolySystem, k: int) -> MonomialBasis:
    """Half Newton polytope of every decrease the degree-2k V can produce."""
    dmap, deg = decrease_support(sys, k)
    if deg % 2:
        raise OddDecreaseDegree(f"decrease has odd degree {deg} for k={k}")
    envelope = Polynomial(sys.nvars, {m: 1 for d in dmap.values() for m in d.support})
    if envelope.is_zero():
        return MonomialBasis(sys.nvars, (), "newton")
    return newton_basis(envelope)


# ---------------------------------------------------------------------------
# exact linear algebra for the projection of the rounded V


def _rref_rows(rows: list[list[Fraction]]) -> list[list[Fraction]]:
    """Linearly independent subset of ``rows`` (as a basis of their span)."""
    basis: list[list[Fraction]] = []
    pivots: list[int] = []
    for r in rows:
        r = list(r)
        for b, p in zip(basis, pivots):
            if r[p]:
                f = r[p] / b[p]
                r = [x - f * y for x, y in zip(r, b)]
        nz = next((i for i, x in enumerate(r) if x), None)
        if nz is not None:
            basis.append(r)
            pivots.append(nz)
    return basis


def _solve(M: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    n = len(M)
    A = [row[:] + [b] for row, b in zip(M, rhs)]
    for col in range(n):
        piv = next(r for r in range(col, n) if A[r][col])
        A[col], A[piv] = A[piv], A[col]
        for r in range(n):
            if r != col and A[r][col]:
                f = A[r][col] / A[col][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    return [A[i][n] / A[i][i] for i in range(n)]


def project_exact(v: list[Fraction], rows: list[list[Fraction]]) -> list[Fraction]:
    """Orthogonal projection of ``v`` onto ``{w : rows . w = 0}`` in exact arithmetic."""
    A = _rref_rows(rows)
    if not A:
        return list(v)
    Av = [sum(a * x for a, x in zip(r, v)) for r in A]
    if not any(Av):
        return list(v)
    AAt = [[sum(a * b for a, b in zip(r, s)) for s in A] for r in A]
    w = _solve(AAt, Av)
    return [x - sum(wi * r[j] for wi, r in zip(w, A)) for j, x in enumerate(v)]


# ---------------------------------------------------------------------------
# synthesis


@dataclass
class SynthParams:
    k_max: int = 3
    sdp_tol: float = 1e-9
    intsos: IntsosParams = field(default_factory=IntsosParams)
    strict_shift: Fraction | None = None  # None: derived from the numerical Gram matrices
    strict_tol: float = 1e-6
    max_reductions: int = 8

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if self.strict_shift is not None:
            self.strict_shift = Fraction(self.strict_shift)
            if self.strict_shift < 0:
                raise ValueError("strict_shift must be nonnegative")


@dataclass(frozen=True)
class LyapunovCertificate:
    V: Polynomial
    half_degree: int
    decrease_poly: Polynomial
    multiplier: Polynomial
    cert_V: WeightedSosCertificate
    cert_decrease: WeightedSosCertificate
    mu_V: Fraction
    mu_D: Fraction
    mode: str = "continuous"

    @property
    def strictness(self) -> str:
        return "positive_definite" if self.mu_D > 0 else "nonnegative"

    def scaled(self, c: Fraction) -> LyapunovCertificate:
        c = Fraction(c)
        if c <= 0:
            raise ValueError("scale factor must be positive")
        return LyapunovCertificate(
            self.V.scale(c),
            self.half_degree,
            self.decrease_poly.scale(c),
            self.multiplier,
            self.cert_V.scaled(c),
            self.cert_decrease.scaled(c),
            self.mu_V * c,
            self.mu_D * c,
            self.mode,
        )


class NoCertificateFound(Exception):
    def __init__(self, failures: dict[int, str]):
        lines = "; ".join(f"k={k}: {why}" for k, why in failures.items())
        super().__init__(f"no Lyapunov certificate found ({lines})")
        self.failures = failures


def _auto_shift(G: np.ndarray) -> Fraction:
    lam = float(np.linalg.eigvalsh(G)[0])
    base = min(lam, float(np.min(np.diag(G)))) / 100
    return max(float_to_dyadic(max(base, 0.0), 40), pow2(-20))


def _solve_reduced(sys: PolySystem, k: int, params: SynthParams) -> tuple[LyapunovSdp, object]:
    basis = _candidate_basis(sys, k)
    for _ in range(params.max_reductions + 1):
        if not len(basis):
            raise SdpError("decrease basis became empty")
        setup = setup_sdp_k(sys, k, basis)
        sol = sdp_solve(setup.problem, params.sdp_tol)
        if sol.slack > params.strict_tol:
            return setup, sol
        G2 = sol.blocks[1]
        diag = np.diag(G2)
        scale = max(np.max(np.abs(np.diag(sol.blocks[0]))), np.max(np.abs(diag)), 1e-300)
        drop = {m for m, d in zip(basis.monomials, diag) if d < 1e-6 * scale}
        if np.min(np.diag(sol.blocks[0])) < 1e-6 * scale:
            raise SdpError(f"V cannot be made positive definite (slack {sol.slack:.2e})")
        if not drop:
            raise SdpError(f"not strictly feasible (slack {sol.slack:.2e})")
        log.debug("k=%d: dropping %d forced-zero monomials from the decrease basis", k, len(drop))
        basis = MonomialBasis(sys.nvars, tuple(m for m in basis.monomials if m not in drop), basis.kind)
    raise SdpError("facial reduction did not reach a strictly feasible problem")


def _certify(g: Polynomial, shift: Polynomial | None, mu: Fraction, params: IntsosParams, attempts: int = 4):
    """intsos on ``g - mu*shift``, shrinking ``mu`` on failure; returns (cert, mu)."""
    last = None
    if shift is not None and mu > 0:
        for _ in range(attempts):
            try:
                cert = intsos(g - shift.scale(mu), IntsosParams(params.eps, params.delta, params.delta_c, params.max_rounds))
                return cert, mu
            except IntsosFailure as exc:
                last = exc
                mu /= 4
    return None, last


def exact_lyapunov(sys: PolySystem, params: SynthParams | None = None) -> LyapunovCertificate:
    params = params or SynthParams()
    n = sys.nvars
    failures: dict[int, str] = {}
    for k in range(1, params.k_max + 1):
        try:
            setup, sol = _solve_reduced(sys, k, params)
        except OddDecreaseDegree as exc:
            failures[k] = f"setup: {exc}"
            continue
        except SdpError as exc:
            failures[k] = f"sdp: {exc}"
            continue

        # round V and project onto the exact linear constraints of the reduced problem
        prec = params.intsos.delta_c
        v = [float_to_dyadic(x, prec) for x in sol.free_values]
        forced_rows = [[coeffs.get(j, Fraction(0)) for j in range(len(v))] for coeffs in setup.forced_zero.values()]
        v = project_exact(v, forced_rows)
        V = Polynomial(n, dict(zip(setup.v_monomials, v)))
        decrease, multiplier = decrease_polynomial(sys, V)

        mu_V = params.strict_shift if params.strict_shift is not None else _auto_shift(sol.blocks[0])
        cert_V, got = _certify(V, form_shift(n, k), mu_V, params.intsos)
        if cert_V is None:
            failures[k] = f"intsos(V): {got}"
            continue
        mu_V = got

        shift_D = pure_power_shift(decrease)
        mu_D = params.strict_shift if params.strict_shift is not None else _auto_shift(sol.blocks[1])
        cert_D, got = _certify(decrease, shift_D, mu_D, params.intsos)
        if cert_D is None:
            mu_D = Fraction(0)
            try:
                cert_D = intsos(decrease, IntsosParams(params.intsos.eps, params.intsos.delta, params.intsos.delta_c, params.intsos.max_rounds))
            except (IntsosFailure, ValueError) as exc:
                failures[k] = f"intsos(decrease): {exc}"
                continue
        else:
            mu_D = got
        cert = LyapunovCertificate(V, k, decrease, multiplier, cert_V, cert_D, mu_V, mu_D, sys.mode)
        verdict = check_lyapunov(sys, cert)
        if verdict.status is Status.INVALID:  # pragma: no cover - soundness guard
            failures[k] = f"check: {verdict.reason}"
            continue
        return cert
    raise NoCertificateFound(failures)


# ---------------------------------------------------------------------------
# checking


class Status(enum.Enum):
    ASYMPTOTICALLY_STABLE = "AsymptoticallyStable"
    STABLE = "Stable"
    INVALID = "Invalid"


@dataclass(frozen=True)
class Verdict:
    status: Status
    reason: str = ""
    residual: Polynomial | None = None

    def __str__(self) -> str:
        if self.status is Status.INVALID:
            extra = f"; residual {poly_print(self.residual)}" if self.residual is not None else ""
            return f"Invalid({self.reason}{extra})"
        return self.status.value


def denominators_positive(sys: PolySystem) -> str | None:
    """Return a failure reason unless every denominator is ``q(0) + SOS``."""
    zero = [0] * sys.nvars
    for q in _distinct(sys.denominators):
        q0 = poly_eval(q, zero)
        if q0 <= 0:
            return f"denominator {poly_print(q, sys.names)} is not positive at the origin"
        rest = q - q0
        if rest.is_zero():
            continue
        # cheap sufficient condition first: only even monomials with positive coefficients
        if all(c > 0 and all(e % 2 == 0 for e in m) for m, c in rest.items()):
            continue
        try:
            intsos(rest)
        except (IntsosFailure, ValueError):
            return f"denominator {poly_print(q, sys.names)} is not certified as a positive constant plus SOS"
    return None


def check_lyapunov(sys: PolySystem, cert: LyapunovCertificate, strict_shift: Fraction | None = None) -> Verdict:
    """Exact re-verification; never consults floating point.

    ``strict_shift`` overrides both recorded shifts when given.
    """
    n = sys.nvars
    mu_V = cert.mu_V if strict_shift is None else Fraction(strict_shift)
    mu_D = cert.mu_D if strict_shift is None else Fraction(strict_shift)
    V = cert.V
    if V.nvars != n:
        return Verdict(Status.INVALID, "V has the wrong number of variables")
    k = cert.half_degree
    if V.is_zero() or not V.is_homogeneous() or V.total_degree() != 2 * k:
        return Verdict(Status.INVALID, f"V is not a nonzero form of degree {2 * k}")
    if cert.mode != sys.mode:
        return Verdict(Status.INVALID, f"certificate is for a {cert.mode} system")
    decrease, multiplier = decrease_polynomial(sys, V)
    if decrease != cert.decrease_poly:
        return Verdict(Status.INVALID, "decrease polynomial does not match the system", decrease - cert.decrease_poly)
    if multiplier != cert.multiplier:
        return Verdict(Status.INVALID, "multiplier does not match the system", multiplier - cert.multiplier)
    if multiplier != Polynomial.const(n, 1):
        why = denominators_positive(sys)
        if why:
            return Verdict(Status.INVALID, why)
    if mu_V <= 0:
        return Verdict(Status.INVALID, "V is not certified positive definite (zero shift)")
    res = verify_certificate(V - form_shift(n, k).scale(mu_V), cert.cert_V)
    if not res.exact:
        return Verdict(Status.INVALID, "certificate for V does not match", res.difference)
    if mu_D < 0:
        return Verdict(Status.INVALID, "negative shift for the decrease")
    if mu_D > 0:
        shift = pure_power_shift(decrease)
        if shift is None:
            return Verdict(Status.INVALID, "decrease has no pure even power for some variable")
        target = decrease - shift.scale(mu_D)
    else:
        target = decrease
    res = verify_certificate(target, cert.cert_decrease)
    if not res.exact:
        return Verdict(Status.INVALID, "certificate for the decrease does not match", res.difference)
    return Verdict(Status.ASYMPTOTICALLY_STABLE if mu_D > 0 else Status.STABLE)


def describe(cert: LyapunovCertificate, names: Sequence[str]) -> str:
    return (
        f"V = {poly_print(cert.V, names)} (degree {2 * cert.half_degree}), "
        f"muV={format_rational(cert.mu_V)} muD={format_rational(cert.mu_D)}"
    )
