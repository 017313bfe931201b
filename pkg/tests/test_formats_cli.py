import io
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES, SYSTEMS
from helpers import random_certificate, tamper
from exactlyap.sos import basis_for
from exactlyap.cli import EXIT_INPUT, EXIT_INVALID, EXIT_NOCERT, EXIT_OK, main
from exactlyap.formats import (
    FormatError,
    format_certificate,
    format_system,
    parse_certificate,
    parse_system,
    read_certificate,
    read_system,
    write_certificate,
)
from exactlyap.lyapunov import LyapunovCertificate
from exactlyap.poly import poly_parse

EX1 = str(SYSTEMS / "example1.sys")
EX2 = str(SYSTEMS / "example2.sys")
EX3 = str(SYSTEMS / "example3.sys")


def run(*argv):
    buf = io.StringIO()
    code = main([str(a) for a in argv], out=buf)
    return code, buf.getvalue()


def test_parse_system_example1():
    s = read_system(EX1)
    assert s.names == ("x1", "x2") and s.mode == "continuous"
    assert s.numerators[0] == poly_parse("-x1^3 + x2", ["x1", "x2"])
    assert s.is_polynomial


def test_parse_system_rational():
    s = read_system(EX3)
    assert s.mode == "discrete"
    assert s.denominators[0] == poly_parse("1 + x^2", ["x", "y"])
    again = parse_system(format_system(s))
    assert again.numerators == s.numerators and again.denominators == s.denominators


def test_parse_system_decimals():
    s = parse_system("vars: x\nmode: continuous\nx' = -1.115*x\n")
    assert s.numerators[0].coeff((1,)) == Fraction(-223, 200)


@pytest.mark.parametrize(
    "text",
    [
        "mode: continuous\nx' = -x\n",
        "vars: x\nmode: sideways\nx' = -x\n",
        "vars: x\nmode: continuous\nx+ = -x\n",
        "vars: x y\nmode: continuous\nx' = -x\n",
        "vars: x\nmode: continuous\nx' = -x\nx' = -2*x\n",
        "vars: x\nmode: continuous\nz' = -z\n",
        "vars: x\nmode: continuous\nx' = -x +\n",
        "vars: x\nmode: continuous\nx' = 1 - x\n",
        "vars: x\nmode: continuous\nx' = (-x) / (x)\n",
        "vars: x x\nmode: continuous\nx' = -x\n",
        "vars: x\nmode: continuous\nthis is not an equation\n",
    ],
)
def test_parse_system_errors(text):
    with pytest.raises(FormatError):
        parse_system(text)


def test_format_error_line_number():
    with pytest.raises(FormatError) as info:
        parse_system("vars: x\nmode: continuous\n\nx' = -x*\n")
    assert info.value.line == 4


def test_certificate_round_trip_fixture():
    for name in ("example1", "example2", "example3"):
        cert, names = read_certificate(FIXTURES / f"{name}_reference.cert")
        again, names2 = parse_certificate(format_certificate(cert, names))
        assert again == cert and names2 == names


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_certificate_round_trip_random(seed):
    rng = random.Random(seed)
    cv = random_certificate(rng, basis_for(2, 1), 3)
    cd = random_certificate(rng, basis_for(2, 2), 3)
    gv, gd = cv.assemble(), cd.assemble()
    cert = LyapunovCertificate(gv, 1, gd, poly_parse("1 + x1^2", ["x1", "x2"]), cv, cd, Fraction(rng.randint(0, 9), 7), Fraction(1, 3), "continuous")
    back, _ = parse_certificate(format_certificate(cert, ["x1", "x2"]))
    assert back == cert


@pytest.mark.parametrize(
    "mutate",
    [
        lambda t: t.replace("lyapcert-v1", "lyapcert-v0"),
        lambda t: t.replace("nvars=2", "nvars=3"),
        lambda t: t.replace("shifts:", "shift:"),
        lambda t: t.replace("muD=0", "muD=zero"),
        lambda t: t.replace("c = 1/2 ; s = x", "c = 1/2 s = x"),
        lambda t: t.replace("x^2 + y^2\n", "x^2 + z^2\n", 1),
        lambda t: t.replace("c = 1/2 ; s = x\n", "c = -1/2 ; s = x\n"),
        lambda t: "",
    ],
)
def test_certificate_errors(mutate):
    text = (FIXTURES / "example3_reference.cert").read_text()
    with pytest.raises(FormatError):
        parse_certificate(mutate(text))


def test_write_certificate(tmp_path):
    cert, names = read_certificate(FIXTURES / "example1_reference.cert")
    write_certificate(tmp_path / "c.cert", cert, names)
    assert read_certificate(tmp_path / "c.cert") == (cert, names)


@pytest.fixture(scope="module")
def ex1_cert_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "ex1.cert"
    code, _ = run("synth", EX1, "-o", path)
    assert code == EXIT_OK
    return path


def test_synth_example1(ex1_cert_path, capsys):
    cert, _ = read_certificate(ex1_cert_path)
    assert cert.half_degree == 1
    code, out = run("check", EX1, ex1_cert_path)
    assert (code, out.strip()) == (EXIT_OK, "AsymptoticallyStable")


def test_synth_to_stdout_and_report(capsys):
    code, out = run("synth", EX2)
    assert code == EXIT_OK and out.startswith("lyapcert-v1")
    assert "degree 2" in capsys.readouterr().err


def test_synth_unstable():
    assert run("synth", SYSTEMS / "unstable.sys", "--kmax", "3")[0] == EXIT_NOCERT


def test_synth_options(tmp_path):
    path = tmp_path / "c.cert"
    code, _ = run("synth", EX1, "-o", path, "--strict-shift", "1/32", "--eps", "1/1000", "--delta", "24", "--delta-c", "24")
    assert code == EXIT_OK
    assert read_certificate(path)[0].mu_V == Fraction(1, 32)


def test_check_reference_fixtures():
    assert run("check", EX1, FIXTURES / "example1_reference.cert") == (EXIT_OK, "AsymptoticallyStable\n")
    assert run("check", EX2, FIXTURES / "example2_reference.cert") == (EXIT_OK, "Stable\n")
    assert run("check", EX3, FIXTURES / "example3_reference.cert") == (EXIT_OK, "Stable\n")


def test_check_tampered(tmp_path):
    cert, names = read_certificate(FIXTURES / "example1_reference.cert")
    bad, _ = tamper(cert, random.Random(3))
    write_certificate(tmp_path / "bad.cert", bad, names)
    code, out = run("check", EX1, tmp_path / "bad.cert")
    assert code == EXIT_INVALID
    assert out.startswith("Invalid(") and "residual" in out


def test_check_input_errors(tmp_path):
    (tmp_path / "broken.sys").write_text("vars: x\nmode: continuous\nx' = -x ^\n")
    assert run("check", tmp_path / "broken.sys", FIXTURES / "example1_reference.cert")[0] == EXIT_INPUT
    assert run("check", EX1, tmp_path / "missing.cert")[0] == EXIT_INPUT
    assert run("check", EX2, FIXTURES / "example1_reference.cert")[0] == EXIT_INPUT
    assert run("synth", tmp_path / "missing.sys")[0] == EXIT_INPUT


def test_bad_command_line():
    with pytest.raises(SystemExit) as info:
        main(["synth", EX1, "--eps", "abc"])
    assert info.value.code == EXIT_INPUT
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == EXIT_INPUT


def test_kernel_example1(ex1_cert_path):
    code, out = run("kernel", EX1, ex1_cert_path, "--plan-size", "2000")
    assert code == EXIT_OK, out
    assert "V: eta(p) = 2*p + " in out
    assert out.rstrip().endswith("kernel: PASS")
    assert "FAIL" not in out


def test_kernel_example3():
    code, out = run("kernel", EX3, FIXTURES / "example3_reference.cert", "--plan-size", "2000")
    assert code == EXIT_OK, out
    assert "PASS nonnegative" in out


def test_kernel_deterministic():
    args = ("kernel", EX1, FIXTURES / "example1_reference.cert", "--plan-size", "1500", "--seed", "5")
    assert run(*args) == run(*args)


def test_kernel_without_shift(tmp_path):
    text = (FIXTURES / "example3_reference.cert").read_text().replace("muV=1/2", "muV=0")
    text = text.replace("c = 1/2 ; s = x\nc = 1/2 ; s = y\n", "c = 1 ; s = x\nc = 1 ; s = y\n")
    (tmp_path / "noshift.cert").write_text(text)
    code, out = run("kernel", EX3, tmp_path / "noshift.cert")
    assert code == EXIT_INVALID
    assert "PASS" not in out
