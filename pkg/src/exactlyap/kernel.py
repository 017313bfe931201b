"""A small executable kernel of constructive analysis.

Reals are regular Cauchy sequences of rationals with a modulus, functions
carry an approximation map together with moduli of convergence and
continuity.  Universally quantified statements can only be sampled here;
each checker reports what it checked and the first counterexample it met.
All assertions are exact rational comparisons.
"""
from __future__ import annotations

import functools
import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence

from .exactnum import ceil_log2, pow2
from .lyapunov import form_shift
from .poly import Polynomial, poly_eval
from .sos import WeightedSosCertificate, verify_certificate

Approx = Callable[[int], Fraction]
Modulus = Callable[[int], int]


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class CReal:
    approx: Approx
    modulus: Modulus

    def at(self, p: int) -> Fraction:
        """The approximant guaranteed to be within ``2^-p`` of the limit."""
        return self.approx(self.modulus(p))


@dataclass(frozen=True)
class RealVector:
    entries: tuple[CReal, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise ValueError("a real vector needs at least one entry")

    def __len__(self) -> int:
        return len(self.entries)

    def approx(self, n: int) -> list[Fraction]:
        return [x.approx(n) for x in self.entries]


@dataclass(frozen=True)
class UniformCont:
    h: Callable[[Fraction, int], Fraction]
    alpha: Modulus
    omega: Modulus
    lo: Fraction
    hi: Fraction


@dataclass(frozen=True)
class ContMV:
    h: Callable[[Sequence[Fraction], int], Fraction]
    alpha: Modulus
    omega: Modulus
    center: tuple[Fraction, ...]
    radius: Fraction
    poly: Polynomial | None = None  # set when h is a polynomial evaluation

    @property
    def nvars(self) -> int:
        return len(self.center)


@dataclass(frozen=True)
class Witness:
    eta: Modulus
    formula: str = ""


def norm1(v: Sequence[Fraction]) -> Fraction:
    return sum((abs(x) for x in v), Fraction(0))


def creal_from_rational(a) -> CReal:
    a = Fraction(a)
    return CReal(lambda n: a, lambda p: 0)


def real_vector(values: Sequence) -> RealVector:
    return RealVector(tuple(creal_from_rational(v) for v in values))


# ---------------------------------------------------------------------------
# reports


@dataclass
class ClauseResult:
    name: str
    passed: bool
    checked: int = 0
    witness: dict | None = None
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        out = f"{status} {self.name} ({self.checked} checks)"
        if self.detail:
            out += f": {self.detail}"
        if self.witness:
            out += " witness " + " ".join(f"{k}={_fmt(v)}" for k, v in self.witness.items())
        return out


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (list, tuple)):
        return "(" + ",".join(_fmt(x) for x in v) + ")"
    return str(v)


@dataclass
class CheckReport:
    name: str
    clauses: list[ClauseResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    @property
    def witness(self) -> dict | None:
        return next((c.witness for c in self.clauses if not c.passed), None)

    def to_text(self) -> str:
        head = f"{self.name}: {'PASS' if self.passed else 'FAIL'}"
        return "\n".join([head] + ["  " + c.line() for c in self.clauses])


# ---------------------------------------------------------------------------
# reals


def cauchy_sample_check(x: CReal, p: int, trials: int = 50, seed: int = 0) -> ClauseResult:
    """Sample index pairs beyond ``modulus(p)`` and test ``|a_n - a_m| <= 2^-p``."""
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = random.Random(seed * 1_000_003 + p)
    m0 = x.modulus(p)
    bound = pow2(-p)
    span = 4 * m0 + 64
    for t in range(trials):
        n = m0 if t == 0 else m0 + rng.randrange(span)
        m = m0 + rng.randrange(span)
        an, am = x.approx(n), x.approx(m)
        if abs(an - am) > bound:
            return ClauseResult(f"cauchy p={p}", False, t + 1, {"n": n, "m": m, "a_n": an, "a_m": am})
    return ClauseResult(f"cauchy p={p}", True, trials)


def real_nneg_at(x: CReal, p: int) -> bool:
    return 0 <= x.approx(x.modulus(p)) + pow2(-p)


def real_pos_at(x: CReal, p: int) -> bool:
    return pow2(-p) <= x.approx(x.modulus(p + 1))


# ---------------------------------------------------------------------------
# application

_PROBE_INDICES = (0, 1, 2, 3, 10, 100)


def _probe_indices(moduli: Sequence[Modulus]) -> set[int]:
    idx = set(_PROBE_INDICES)
    for M in moduli:
        idx.update(M(p) for p in range(1, 9))
    return idx


def apply_cont(f: ContMV | UniformCont, x: RealVector | CReal) -> CReal:
    """``f(x)`` as the sequence ``h(a_n, n)`` with the modulus of the application construction."""
    if isinstance(f, UniformCont):
        if not isinstance(x, CReal):
            raise TypeError("a univariate function needs a CReal argument")
        for n in sorted(_probe_indices([x.modulus])):
            a = x.approx(n)
            if not f.lo <= a <= f.hi:
                raise DomainError(f"approximant a_{n} = {a} outside [{f.lo}, {f.hi}]")
        return CReal(
            lambda n: f.h(x.approx(n), n),
            lambda p: max(f.alpha(p + 2), x.modulus(max(f.omega(p + 1) - 1, 0))),
        )
    if isinstance(x, CReal):
        x = RealVector((x,))
    if len(x) != f.nvars:
        raise DomainError(f"argument has {len(x)} entries, function expects {f.nvars}")
    for n in sorted(_probe_indices([e.modulus for e in x.entries])):
        a = x.approx(n)
        if norm1([ai - ci for ai, ci in zip(a, f.center)]) > f.radius:
            raise DomainError(f"approximant at index {n} lies outside the ball")
    # approximants are pure, so repeated precision queries may share them
    return CReal(
        functools.lru_cache(maxsize=32)(lambda n: f.h(x.approx(n), n)),
        lambda p: max([f.alpha(p + 2)] + [e.modulus(max(f.omega(p + 1) - 1, 0)) for e in x.entries]),
    )


def lipschitz_bound(g: Polynomial, center: Sequence[Fraction], radius: Fraction) -> Fraction:
    """Bound on the 1-norm of the gradient of ``g`` over the 1-norm ball."""
    reach = norm1(center) + radius
    total = Fraction(0)
    for m, c in g.items():
        d = sum(m)
        for e in m:
            if e:
                total += abs(c) * e * reach ** (d - 1)
    return total


def poly_to_contmv(g: Polynomial, center: Sequence | None = None, radius=1) -> ContMV:
    radius = Fraction(radius)
    if radius <= 0:
        raise ValueError("radius must be positive")
    center = tuple(Fraction(c) for c in center) if center is not None else (Fraction(0),) * g.nvars
    if len(center) != g.nvars:
        raise ValueError("center has the wrong dimension")
    L = max(lipschitz_bound(g, center, radius), Fraction(1))
    shift = 1 + ceil_log2(L)
    return ContMV(lambda e, n: poly_eval(g, e), lambda p: 0, lambda p: p + shift, center, radius, g)


def continuity_grid_check(f: UniformCont, step_exp: int, precisions: Sequence[int]) -> ClauseResult:
    """Exhaustive continuity clause over the dyadic grid of ``[lo, hi]`` with step ``2^-step_exp``."""
    step = pow2(-step_exp)
    count = int((f.hi - f.lo) / step)
    grid = [f.lo + i * step for i in range(count + 1)]
    checked = 0
    for p in precisions:
        reach = pow2(-f.omega(p) + 1)
        window = int(reach / step)
        bound = pow2(-p)
        n = f.alpha(p)
        vals = [f.h(a, n) for a in grid]
        for i, a in enumerate(grid):
            for j in range(i, min(i + window, count) + 1):
                checked += 1
                if abs(vals[i] - vals[j]) > bound:
                    return ClauseResult("continuity", False, checked, {"a": a, "b": grid[j], "p": p})
    return ClauseResult("continuity", True, checked)


# ---------------------------------------------------------------------------
# sampling plans


@dataclass(frozen=True)
class SamplingPlan:
    points: tuple[tuple[Fraction, ...], ...]
    precisions: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.points)


def _sphere_grid(nvars: int, res: int) -> Iterator[tuple[int, ...]]:
    """Integer vectors with 1-norm ``2^res`` (directions on the 1-norm sphere)."""
    total = 1 << res
    for comp in itertools.product(range(total + 1), repeat=nvars - 1):
        s = sum(comp)
        if s > total:
            continue
        mags = comp + (total - s,)
        nz = [i for i, v in enumerate(mags) if v]
        for signs in itertools.product((-1, 1), repeat=len(nz)):
            v = list(mags)
            for i, sg in zip(nz, signs):
                v[i] *= sg
            yield tuple(v)


def default_plan(
    nvars: int,
    resolution: int = 6,
    shells: int = 8,
    target: int = 10_000,
    random_points: int = 1000,
    seed: int = 0,
    radius=1,
) -> SamplingPlan:
    """Dyadic points on the shells ``|e|_1 in {2^-p, 2^-p+1}`` plus seeded random points in the ball.

    The shell grid is subsampled (deterministically) when it alone would
    exceed ``target - random_points``; otherwise random points fill up to
    ``target``.
    """
    radius = Fraction(radius)
    rng = random.Random(seed)
    scale = 1 << resolution
    directions = list(_sphere_grid(nvars, resolution))
    radii: list[Fraction] = []
    for p in range(1, shells + 1):
        for r in (pow2(-p), pow2(-p + 1)):
            if r <= radius and r not in radii:
                radii.append(r)
    budget = max(target - random_points, 0)
    per_shell = len(directions)
    if per_shell * len(radii) > budget and radii:
        keep = max(budget // len(radii), 1)
        chosen = [directions[i] for i in sorted(rng.sample(range(per_shell), min(keep, per_shell)))]
    else:
        chosen = directions
    points = [tuple(Fraction(c, scale) * r for c in d) for r in radii for d in chosen]
    extra = max(random_points, target - len(points))
    span = 1 << 12
    while extra > 0:
        z = [rng.randint(-span, span) for _ in range(nvars)]
        nz = sum(abs(v) for v in z)
        if nz == 0:
            continue
        r = Fraction(rng.randint(1, span), span) * radius
        points.append(tuple(Fraction(v, nz) * r for v in z))
        extra -= 1
    return SamplingPlan(tuple(points), tuple(range(1, shells + 5)))


# ---------------------------------------------------------------------------
# definiteness checks


def check_nonneg(g: ContMV, plan: SamplingPlan) -> CheckReport:
    """Sampled nonnegativity: ``-2^-p <= h(e, n)`` for ``n`` at and beyond ``alpha(p)``."""
    clause = ClauseResult("nonnegative", True)
    for e in plan.points:
        if norm1([a - c for a, c in zip(e, g.center)]) > g.radius:
            continue
        values: dict[int, Fraction] = {}
        for p in plan.precisions:
            n0 = g.alpha(p)
            for n in (n0, n0 + 1, n0 + 7):
                clause.checked += 1
                if n not in values:
                    values[n] = g.h(e, n)
                v = values[n]
                if v < -pow2(-p):
                    clause.passed = False
                    clause.witness = {"e": e, "p": p, "value": v}
                    return CheckReport("ContNonNeg", [clause])
    return CheckReport("ContNonNeg", [clause])


def check_pos_def_rat_wit(g: ContMV, w: Witness, plan: SamplingPlan) -> CheckReport:
    report = CheckReport("PosDefRatWit")
    n = g.nvars
    report.clauses.append(
        ClauseResult("center in ball", norm1(g.center) <= g.radius, 1, None if norm1(g.center) <= g.radius else {"norm": norm1(g.center)})
    )
    zero = [Fraction(0)] * n
    g0 = g.h(zero, 0)
    report.clauses.append(ClauseResult("vanishes at origin", g0 == 0, 1, None if g0 == 0 else {"value": g0}))
    clause = ClauseResult("positive away from origin", True)
    report.clauses.append(clause)
    for e in plan.points:
        if norm1([a - c for a, c in zip(e, g.center)]) > g.radius:
            continue
        size = norm1(e)
        x = apply_cont(g, real_vector(e))
        for p in plan.precisions:
            if pow2(-p) > size:
                continue
            clause.checked += 1
            if not real_pos_at(x, w.eta(p)):
                clause.passed = False
                clause.witness = {"e": e, "p": p, "eta": w.eta(p), "value": x.at(w.eta(p) + 1)}
                return report
    return report


def eta_from_certificate(
    g: Polynomial,
    cert: WeightedSosCertificate,
    mu,
    half_degree: int,
    shift: Polynomial | None = None,
) -> Witness:
    """Witness for positive definiteness from an exact SOS certificate of ``g - mu*shift``.

    By default the shift is ``sum_{|a| = k} x^(2a)``.  A pure-power shift
    ``sum_i x_i^(2 m_i)`` is also accepted; the bound then uses ``2 max m_i``
    and holds on the unit ball.
    """
    mu = Fraction(mu)
    if mu <= 0:
        raise ValueError("a positive shift is needed to derive a witness")
    n = g.nvars
    if shift is None:
        shift = form_shift(n, half_degree)
        power = 2 * half_degree
    else:
        power = max(sum(m) for m in shift.support)
    if not verify_certificate(g - shift.scale(mu), cert).exact:
        raise ValueError("certificate does not match the shifted polynomial")
    a = power
    b = ceil_log2(Fraction(n))
    c = max(ceil_log2(1 / mu), 0)
    const = a * b + c + 1
    return Witness(lambda p: a * (p + b) + c + 1, f"{a}*p + {const}")
