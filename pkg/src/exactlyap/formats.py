"""Text formats: system descriptions and Lyapunov certificates."""
from __future__ import annotations

import re
from pathlib import Path

from .exactnum import format_rational, parse_rational
from .lyapunov import LyapunovCertificate, PolySystem
from .poly import ParseError, Polynomial, poly_parse, poly_print
from .sos import WeightedSosCertificate

CERT_MAGIC = "lyapcert-v1"
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class FormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def _split_fraction(rhs: str) -> tuple[str, str | None]:
    """Split ``num / (den)`` at a top-level slash followed by a parenthesis."""
    depth = 0
    for i, ch in enumerate(rhs):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "/" and depth == 0 and rhs[i + 1 :].lstrip().startswith("("):
            return rhs[:i], rhs[i + 1 :]
    return rhs, None


def parse_system(text: str) -> PolySystem:
    names: list[str] | None = None
    mode = None
    eqs: dict[str, tuple[Polynomial, Polynomial | None]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("vars:"):
            names = line[5:].split()
            if not names or any(not _NAME.match(n) for n in names) or len(set(names)) != len(names):
                raise FormatError("bad variable list", lineno)
            continue
        if line.startswith("mode:"):
            mode = line[5:].strip()
            if mode not in ("continuous", "discrete"):
                raise FormatError(f"unknown mode {mode!r}", lineno)
            continue
        m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(['+])\s*=(.*)$", line)
        if not m:
            raise FormatError(f"cannot read {raw.strip()!r}", lineno)
        if names is None or mode is None:
            raise FormatError("equations must follow the vars: and mode: lines", lineno)
        var, mark, rhs = m.groups()
        if var not in names:
            raise FormatError(f"undeclared variable {var}", lineno)
        if (mark == "'") != (mode == "continuous"):
            raise FormatError(f"{var}{mark} does not match mode {mode}", lineno)
        if var in eqs:
            raise FormatError(f"second equation for {var}", lineno)
        num, den = _split_fraction(rhs)
        try:
            eqs[var] = (poly_parse(num, names), poly_parse(den, names) if den is not None else None)
        except ParseError as exc:
            raise FormatError(str(exc), lineno) from exc
    if names is None or mode is None:
        raise FormatError("missing vars: or mode: line")
    missing = [n for n in names if n not in eqs]
    if missing:
        raise FormatError(f"no equation for {', '.join(missing)}")
    one = Polynomial.const(len(names), 1)
    nums = tuple(eqs[n][0] for n in names)
    dens = tuple(eqs[n][1] if eqs[n][1] is not None else one for n in names)
    try:
        return PolySystem(nums, dens, mode, tuple(names))
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def read_system(path: str | Path) -> PolySystem:
    return parse_system(Path(path).read_text(encoding="utf-8"))


def format_system(sys: PolySystem) -> str:
    mark = "'" if sys.mode == "continuous" else "+"
    one = Polynomial.const(sys.nvars, 1)
    lines = [f"vars: {' '.join(sys.names)}", f"mode: {sys.mode}"]
    for name, p, q in zip(sys.names, sys.numerators, sys.denominators):
        rhs = poly_print(p, sys.names)
        if q != one:
            rhs = f"({rhs}) / ({poly_print(q, sys.names)})"
        lines.append(f"{name}{mark} = {rhs}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# certificates


def _format_sos(cert: WeightedSosCertificate, names) -> list[str]:
    return [f"c = {format_rational(c)} ; s = {poly_print(s, names)}" for c, s in zip(cert.weights, cert.squares)]


def format_certificate(cert: LyapunovCertificate, names) -> str:
    names = list(names)
    out = [
        f"{CERT_MAGIC} nvars={len(names)} mode={cert.mode} half_degree={cert.half_degree} vars={','.join(names)}",
        "V:",
        poly_print(cert.V, names),
        "multiplier:",
        poly_print(cert.multiplier, names),
        "decrease:",
        poly_print(cert.decrease_poly, names),
        "cert_V:",
        *_format_sos(cert.cert_V, names),
        "cert_decrease:",
        *_format_sos(cert.cert_decrease, names),
        f"shifts: muV={format_rational(cert.mu_V)} muD={format_rational(cert.mu_D)}",
    ]
    return "\n".join(out) + "\n"


_SECTIONS = ("V:", "multiplier:", "decrease:", "cert_V:", "cert_decrease:")


def parse_certificate(text: str) -> tuple[LyapunovCertificate, list[str]]:
    lines = [(i, ln.strip()) for i, ln in enumerate(text.splitlines(), 1) if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or not lines[0][1].startswith(CERT_MAGIC):
        raise FormatError(f"not a {CERT_MAGIC} file", lines[0][0] if lines else None)
    header = dict(kv.split("=", 1) for kv in lines[0][1].split()[1:] if "=" in kv)
    try:
        nvars = int(header["nvars"])
        mode = header["mode"]
        k = int(header["half_degree"])
        names = header["vars"].split(",")
    except (KeyError, ValueError) as exc:
        raise FormatError(f"incomplete header ({exc})", lines[0][0]) from exc
    if len(names) != nvars:
        raise FormatError("vars= does not match nvars=", lines[0][0])

    body: dict[str, list[tuple[int, str]]] = {s: [] for s in _SECTIONS}
    current = None
    shifts = None
    for lineno, line in lines[1:]:
        if line in _SECTIONS:
            current = line
        elif line.startswith("shifts:"):
            shifts = (lineno, line)
            current = None
        elif current is None:
            raise FormatError(f"unexpected line {line!r}", lineno)
        else:
            body[current].append((lineno, line))

    def poly(section: str) -> Polynomial:
        entries = body[section]
        if len(entries) != 1:
            raise FormatError(f"section {section} needs exactly one polynomial line")
        lineno, line = entries[0]
        try:
            return poly_parse(line, names)
        except ParseError as exc:
            raise FormatError(str(exc), lineno) from exc

    def sos(section: str) -> WeightedSosCertificate:
        weights, squares = [], []
        for lineno, line in body[section]:
            m = re.match(r"^c\s*=\s*(\S+)\s*;\s*s\s*=(.*)$", line)
            if not m:
                raise FormatError(f"expected 'c = <rational> ; s = <poly>', got {line!r}", lineno)
            try:
                weights.append(parse_rational(m.group(1)))
                squares.append(poly_parse(m.group(2), names))
            except (ParseError, ValueError, ZeroDivisionError) as exc:
                raise FormatError(str(exc), lineno) from exc
        try:
            return WeightedSosCertificate(tuple(weights), tuple(squares))
        except ValueError as exc:
            raise FormatError(f"{section} {exc}") from exc

    if shifts is None:
        raise FormatError("missing shifts: line")
    sh = dict(kv.split("=", 1) for kv in shifts[1][len("shifts:") :].split() if "=" in kv)
    try:
        mu_V, mu_D = parse_rational(sh["muV"]), parse_rational(sh["muD"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad shifts line ({exc})", shifts[0]) from exc
    cert = LyapunovCertificate(
        poly("V:"), k, poly("decrease:"), poly("multiplier:"), sos("cert_V:"), sos("cert_decrease:"), mu_V, mu_D, mode
    )
    return cert, names


def read_certificate(path: str | Path) -> tuple[LyapunovCertificate, list[str]]:
    return parse_certificate(Path(path).read_text(encoding="utf-8"))


def write_certificate(path: str | Path, cert: LyapunovCertificate, names) -> None:
    Path(path).write_text(format_certificate(cert, names), encoding="utf-8")

