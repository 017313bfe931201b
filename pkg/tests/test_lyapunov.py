import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import tamper
from exactlyap.formats import read_certificate, read_system
from exactlyap.lyapunov import (
    LyapunovCertificate,
    NoCertificateFound,
    OddDecreaseDegree,
    PolySystem,
    Status,
    SynthParams,
    check_lyapunov,
    decrease_polynomial,
    decrease_support,
    denominators_positive,
    exact_lyapunov,
    form_shift,
    project_exact,
    pure_power_shift,
    setup_sdp_k,
)
from exactlyap.poly import Polynomial, poly_eval, poly_parse

X = ["x1", "x2"]


def P(text, names=X):
    return poly_parse(text, names)


@pytest.fixture(scope="module")
def ex1(request):
    from conftest import SYSTEMS

    return read_system(SYSTEMS / "example1.sys")


@pytest.fixture(scope="module")
def ex2():
    from conftest import SYSTEMS

    return read_system(SYSTEMS / "example2.sys")


@pytest.fixture(scope="module")
def ex3():
    from conftest import SYSTEMS

    return read_system(SYSTEMS / "example3.sys")


@pytest.fixture(scope="module")
def ex1_cert(ex1):
    return exact_lyapunov(ex1)


def test_example1_decrease(ex1):
    dec, mult = decrease_polynomial(ex1, P("223/200*x1^2 + 223/200*x2^2"))
    assert dec == P("223/100*x1^4 + 223/100*x2^2")
    assert mult == Polynomial.const(2, 1)


def test_example3_decrease(ex3):
    n = ["x", "y"]
    dec, mult = decrease_polynomial(ex3, poly_parse("x^2 + y^2", n))
    assert dec == poly_parse("x^6*y^4 + x^4*y^6 + 2*x^6*y^2 + 4*x^4*y^4 + 2*x^2*y^6 + 5*x^4*y^2 + 5*x^2*y^4 + 4*x^2*y^2", n)
    assert mult == poly_parse("(1 + x^2)^2*(1 + y^2)^2", n)


def test_example2_multiplier(ex2):
    n = ["x1", "x2", "x3"]
    _, mult = decrease_polynomial(ex2, poly_parse("x1^2", n))
    assert mult == poly_parse("x3^2 + 1", n)


def test_zero_candidate(ex1, ex3):
    for s in (ex1, ex3):
        dec, _ = decrease_polynomial(s, Polynomial.zero(s.nvars))
        assert dec.is_zero()


def test_discrete_decrease_matches_composition(ex3):
    # multiplier*(V - V o f) evaluated at a rational point, against direct evaluation
    n = ["x", "y"]
    V = poly_parse("3*x^2 - x*y + 2*y^2", n)
    dec, mult = decrease_polynomial(ex3, V)
    pt = [Fraction(2, 3), Fraction(-5, 7)]
    fx = [poly_eval(p, pt) / poly_eval(q, pt) for p, q in zip(ex3.numerators, ex3.denominators)]
    assert poly_eval(dec, pt) == poly_eval(mult, pt) * (poly_eval(V, pt) - poly_eval(V, fx))


def test_continuous_decrease_matches_lie_derivative(ex2):
    n = ["x1", "x2", "x3"]
    V = poly_parse("x1^2 + 2*x2^2 + 3*x3^2 + x1*x3", n)
    dec, mult = decrease_polynomial(ex2, V)
    pt = [Fraction(1, 2), Fraction(-3), Fraction(2, 5)]
    f = [poly_eval(p, pt) / poly_eval(q, pt) for p, q in zip(ex2.numerators, ex2.denominators)]
    lie = sum(poly_eval(V.diff(i), pt) * f[i] for i in range(3))
    assert poly_eval(dec, pt) == -poly_eval(mult, pt) * lie


def test_setup_dims(ex1, ex2):
    setup = setup_sdp_k(ex1, 1)
    assert setup.dims == [2, 6]
    assert setup.basis_V.monomials == ((1, 0), (0, 1))
    assert setup_sdp_k(ex2, 1).dims[0] == 3


def test_setup_odd_degree():
    s = PolySystem.polynomial([poly_parse("-x1^2", ["x1"])])
    with pytest.raises(OddDecreaseDegree):
        setup_sdp_k(s, 1)


def test_system_validation():
    one = Polynomial.const(1, 1)
    with pytest.raises(ValueError):
        PolySystem.polynomial([poly_parse("x1 + 1", ["x1"])])
    with pytest.raises(ValueError):
        PolySystem((poly_parse("x1", ["x1"]),), (poly_parse("x1", ["x1"]),))
    with pytest.raises(ValueError):
        PolySystem((poly_parse("x1", ["x1"]),), (one,), mode="hybrid")
    with pytest.raises(ValueError):
        PolySystem((P("x1"),), (one,))


def test_synth_example1(ex1, ex1_cert):
    c = ex1_cert
    assert c.half_degree == 1
    assert check_lyapunov(ex1, c).status is Status.ASYMPTOTICALLY_STABLE
    a = c.decrease_poly.coeff((4, 0))
    assert a > 0 and c.decrease_poly == P("x1^4 + x2^2").scale(a)


def test_synth_example2(ex2):
    c = exact_lyapunov(ex2)
    assert c.half_degree == 1
    assert all(m in {(2, 0, 0), (0, 2, 0), (0, 0, 2)} for m in c.V.support)
    assert check_lyapunov(ex2, c).status in (Status.STABLE, Status.ASYMPTOTICALLY_STABLE)


def test_synth_example3(ex3):
    c = exact_lyapunov(ex3)
    assert c.half_degree == 1
    assert check_lyapunov(ex3, c).status is Status.STABLE


def test_unstable_has_no_certificate():
    s = PolySystem.polynomial([poly_parse("x1", ["x1"])])
    with pytest.raises(NoCertificateFound) as info:
        exact_lyapunov(s, SynthParams(k_max=3))
    assert set(info.value.failures) == {1, 2, 3}


def test_fixed_strict_shift(ex1):
    c = exact_lyapunov(ex1, SynthParams(strict_shift=Fraction(1, 64)))
    assert c.mu_V == Fraction(1, 64) and c.mu_D == Fraction(1, 64)
    assert check_lyapunov(ex1, c).status is Status.ASYMPTOTICALLY_STABLE


def test_reference_certificates(ex1, ex2, ex3):
    from conftest import FIXTURES

    expected = {"example1": Status.ASYMPTOTICALLY_STABLE, "example2": Status.STABLE, "example3": Status.STABLE}
    for name, s in (("example1", ex1), ("example2", ex2), ("example3", ex3)):
        cert, _ = read_certificate(FIXTURES / f"{name}_reference.cert")
        assert check_lyapunov(s, cert).status is expected[name]


def test_check_rejects_zero_V_shift(ex1, ex1_cert):
    from dataclasses import replace

    v = check_lyapunov(ex1, replace(ex1_cert, mu_V=Fraction(0)))
    assert v.status is Status.INVALID


def test_check_rejects_wrong_system(ex1_cert):
    other = PolySystem.polynomial([P("-x1"), P("-x2 + x1")])
    v = check_lyapunov(other, ex1_cert)
    assert v.status is Status.INVALID and not v.residual.is_zero()


def test_check_with_explicit_shift(ex1):
    from conftest import FIXTURES

    cert, _ = read_certificate(FIXTURES / "example1_reference.cert")
    assert check_lyapunov(ex1, cert, strict_shift=Fraction(1)).status is Status.ASYMPTOTICALLY_STABLE
    assert check_lyapunov(ex1, cert, strict_shift=Fraction(1, 2)).status is Status.INVALID


def test_tampering_detected(ex1, ex1_cert):
    rng = random.Random(11)
    for _ in range(20):
        bad, _ = tamper(ex1_cert, rng)
        v = check_lyapunov(ex1, bad)
        assert v.status is Status.INVALID
        assert v.residual is not None and not v.residual.is_zero()


@settings(max_examples=10, deadline=None)
@given(st.fractions(min_value=Fraction(1, 100), max_value=100, max_denominator=100))
def test_scaling_invariance(ex1, ex1_cert, c):
    assert check_lyapunov(ex1, ex1_cert.scaled(c)).status is Status.ASYMPTOTICALLY_STABLE


def test_equilibrium(ex1_cert):
    assert poly_eval(ex1_cert.V, [0, 0]) == 0


odd_degree = st.sampled_from([1, 3, 5])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), odd_degree, st.integers(1, 3), st.randoms(use_true_random=False))
def test_degree_bookkeeping(n, d, k, rnd):
    names = [f"x{i + 1}" for i in range(n)]
    rhs = []
    for i in range(n):
        terms = {tuple(rnd.randint(0, 1) for _ in range(n)): Fraction(rnd.randint(-3, 3))}
        top = [0] * n
        top[rnd.randrange(n)] = d
        terms[tuple(top)] = Fraction(rnd.choice([-2, -1, 1, 2]))
        terms.pop((0,) * n, None)
        rhs.append(Polynomial(n, terms))
    s = PolySystem.polynomial(rhs, names=names)
    _, deg = decrease_support(s, k)
    assert deg == 2 * k - 1 + s.max_degree()


def test_project_exact():
    v = [Fraction(1), Fraction(2), Fraction(3)]
    rows = [[Fraction(1), Fraction(-1), Fraction(0)], [Fraction(2), Fraction(-2), Fraction(0)]]
    w = project_exact(v, rows)
    assert w == [Fraction(3, 2), Fraction(3, 2), Fraction(3)]
    assert project_exact(v, []) == v


def test_pure_power_shift():
    assert pure_power_shift(P("3*x1^4 + x1^2 + 2*x2^2 - x1*x2")) == P("x1^2 + x2^2")
    assert pure_power_shift(P("x1^2*x2^2 + x1^4")) is None
    assert form_shift(2, 1) == P("x1^2 + x2^2")


def test_denominator_positivity(ex2, ex3):
    assert denominators_positive(ex2) is None
    assert denominators_positive(ex3) is None
    s = PolySystem((P("-x1"), P("-x2")), (P("1 - x1^2"), Polynomial.const(2, 1)))
    assert denominators_positive(s) is not None


def test_certificate_mode_mismatch(ex1, ex1_cert):
    from dataclasses import replace

    assert check_lyapunov(ex1, replace(ex1_cert, mode="discrete")).status is Status.INVALID


def test_scaled_rejects_nonpositive(ex1_cert):
    with pytest.raises(ValueError):
        ex1_cert.scaled(0)
    assert isinstance(ex1_cert.scaled(2), LyapunovCertificate)
