"""Generators shared by several test modules."""
import random
from fractions import Fraction

import numpy as np

from exactlyap.poly import Polynomial
from exactlyap.sos import MonomialBasis, WeightedSosCertificate, basis_for, gram_problem


def random_basis(rng: random.Random, max_dim: int = 10) -> MonomialBasis:
    while True:
        n = rng.randint(1, 3)
        d = rng.randint(1, 3 if n == 1 else 2)
        kind = rng.choice(["full", "homogeneous"])
        basis = basis_for(n, d, kind)
        if 2 <= len(basis) <= max_dim:
            return basis


def random_psd_gram(rng: random.Random, dim: int, rank: int | None = None) -> list[list[Fraction]]:
    rank = dim if rank is None else rank
    F = [[Fraction(rng.randint(-4, 4), rng.randint(1, 3)) for _ in range(rank)] for _ in range(dim)]
    return [[sum((F[i][t] * F[j][t] for t in range(rank)), Fraction(0)) for j in range(dim)] for i in range(dim)]


def gram_polynomial(G, basis: MonomialBasis) -> Polynomial:
    terms: dict = {}
    for i, a in enumerate(basis.monomials):
        for j, b in enumerate(basis.monomials):
            m = tuple(x + y for x, y in zip(a, b))
            terms[m] = terms.get(m, Fraction(0)) + G[i][j]
    return Polynomial(basis.nvars, terms)


def random_gram_problem(seed: int):
    """A Gram feasibility problem with a known feasible point."""
    rng = random.Random(seed)
    basis = random_basis(rng)
    G = random_psd_gram(rng, len(basis), rank=rng.randint(1, len(basis)))
    g = gram_polynomial(G, basis)
    return g, basis, gram_problem(g, basis), np.array([[float(x) for x in row] for row in G])


def random_certificate(rng: random.Random, basis: MonomialBasis, nsquares: int) -> WeightedSosCertificate:
    weights, squares = [], []
    for _ in range(nsquares):
        coeffs = {m: Fraction(rng.randint(-5, 5), rng.randint(1, 4)) for m in basis.monomials if rng.random() < 0.6}
        weights.append(Fraction(rng.randint(1, 9), rng.randint(1, 5)))
        squares.append(Polynomial(basis.nvars, coeffs))
    return WeightedSosCertificate(tuple(weights), tuple(squares))


def constraint_residual(prob, sol) -> float:
    """Residual recomputed from the problem data, independent of the solver's report."""
    worst = 0.0
    for con in prob.constraints:
        total = sum(c * sol.blocks[b][i, j] for (b, i, j), c in con.matrix.items())
        total += sum(c * sol.free_values[k] for k, c in con.free.items())
        worst = max(worst, abs(total - con.rhs))
    return worst


def _bump(p: Polynomial, rng: random.Random, delta: Fraction) -> Polynomial:
    mono = rng.choice(sorted(p.support))
    terms = dict(p.terms)
    terms[mono] = terms[mono] + delta
    return Polynomial(p.nvars, terms)


def tamper(cert, rng: random.Random):
    """Perturb exactly one coefficient (or weight) of a Lyapunov certificate.

    Magnitudes range over 10^-6 .. 10^-1; weights are only ever increased so
    they stay nonnegative.
    """
    from dataclasses import replace

    delta = Fraction(1, 10 ** rng.randint(1, 6)) * rng.choice([-1, 1])
    target = rng.choice(["V", "decrease", "multiplier", "cert_V", "cert_decrease"])
    if target == "V":
        return replace(cert, V=_bump(cert.V, rng, delta)), target
    if target == "decrease":
        return replace(cert, decrease_poly=_bump(cert.decrease_poly, rng, delta)), target
    if target == "multiplier":
        return replace(cert, multiplier=_bump(cert.multiplier, rng, delta)), target
    sos = getattr(cert, target)
    i = rng.randrange(len(sos))
    weights, squares = list(sos.weights), list(sos.squares)
    if rng.random() < 0.5:
        weights[i] += abs(delta)
    else:
        squares[i] = _bump(squares[i], rng, delta)
    return replace(cert, **{target: WeightedSosCertificate(tuple(weights), tuple(squares))}), target
