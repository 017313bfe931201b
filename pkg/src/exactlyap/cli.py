"""Command line front end.

    exactlyap synth SYSTEM [-o CERT]
    exactlyap check SYSTEM CERT
    exactlyap kernel SYSTEM CERT

Exit codes: 0 success, 1 verification failed, 2 no certificate found,
3 unreadable or malformed input.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .exactnum import parse_rational
from .formats import FormatError, format_certificate, read_certificate, read_system
from .kernel import check_nonneg, check_pos_def_rat_wit, default_plan, eta_from_certificate, poly_to_contmv
from .lyapunov import NoCertificateFound, Status, SynthParams, check_lyapunov, exact_lyapunov, pure_power_shift
from .poly import poly_print
from .sos import IntsosParams

EXIT_OK, EXIT_INVALID, EXIT_NOCERT, EXIT_INPUT = 0, 1, 2, 3


def _rational(text: str):
    try:
        return parse_rational(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


class _Parser(argparse.ArgumentParser):
    # bad command lines count as malformed input, not as a synthesis failure
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_INPUT)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="exactlyap", description="Exact SOS Lyapunov certificates.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="search for a certificate")
    s.add_argument("system")
    s.add_argument("-o", "--output", help="certificate path (default: stdout)")
    s.add_argument("--kmax", type=int, default=3, help="largest half degree to try")
    s.add_argument("--eps", type=_rational, default=None, help="initial intsos perturbation")
    s.add_argument("--delta", type=int, default=30, help="Gram rounding precision (bits)")
    s.add_argument("--delta-c", type=int, default=30, help="LDL rounding precision (bits)")
    s.add_argument("--strict-shift", type=_rational, default=None, help="fixed positivity shift mu")

    c = sub.add_parser("check", help="exactly verify a certificate")
    c.add_argument("system")
    c.add_argument("certificate")

    k = sub.add_parser("kernel", help="run the sampled constructive checks on a certificate")
    k.add_argument("system")
    k.add_argument("certificate")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--plan-resolution", type=int, default=6, help="shell grid step 2^-R")
    k.add_argument("--plan-size", type=int, default=10_000)
    return ap


def cmd_synth(args, out) -> int:
    system = read_system(args.system)
    params = SynthParams(
        k_max=args.kmax,
        intsos=IntsosParams(eps=args.eps, delta=args.delta, delta_c=args.delta_c),
        strict_shift=args.strict_shift,
    )
    try:
        cert = exact_lyapunov(system, params)
    except NoCertificateFound as exc:
        print(f"synthesis failed: {exc}", file=sys.stderr)
        return EXIT_NOCERT
    verdict = check_lyapunov(system, cert)
    text = format_certificate(cert, system.names)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    print(f"degree {2 * cert.half_degree}: V = {poly_print(cert.V, system.names)}", file=sys.stderr)
    print(f"verdict {verdict}", file=sys.stderr)
    return EXIT_OK if verdict.status is not Status.INVALID else EXIT_INVALID


def _load_pair(args):
    system = read_system(args.system)
    cert, names = read_certificate(args.certificate)
    if len(names) != system.nvars:
        raise FormatError(f"certificate has {len(names)} variables, system has {system.nvars}")
    return system, cert


def cmd_check(args, out) -> int:
    system, cert = _load_pair(args)
    verdict = check_lyapunov(system, cert)
    if verdict.status is Status.INVALID:
        extra = f"; residual {poly_print(verdict.residual, system.names)}" if verdict.residual is not None else ""
        out.write(f"Invalid({verdict.reason}{extra})\n")
        return EXIT_INVALID
    out.write(f"{verdict.status.value}\n")
    return EXIT_OK


def cmd_kernel(args, out) -> int:
    system, cert = _load_pair(args)
    verdict = check_lyapunov(system, cert)
    if verdict.status is Status.INVALID:
        out.write(f"certificate rejected: {verdict}\n")
        return EXIT_INVALID
    plan = default_plan(system.nvars, resolution=args.plan_resolution, target=args.plan_size, seed=args.seed)
    try:
        wV = eta_from_certificate(cert.V, cert.cert_V, cert.mu_V, cert.half_degree)
    except ValueError as exc:
        out.write(f"witness derivation impossible for V: {exc}\n")
        return EXIT_INVALID
    out.write(f"plan: {len(plan)} points, precisions {plan.precisions[0]}..{plan.precisions[-1]}\n")
    out.write(f"V: eta(p) = {wV.formula}\n")
    reports = [check_pos_def_rat_wit(poly_to_contmv(cert.V), wV, plan)]
    dec = poly_to_contmv(cert.decrease_poly)
    if cert.mu_D > 0:
        wD = eta_from_certificate(cert.decrease_poly, cert.cert_decrease, cert.mu_D, cert.half_degree, pure_power_shift(cert.decrease_poly))
        out.write(f"decrease: eta(p) = {wD.formula}\n")
        reports.append(check_pos_def_rat_wit(dec, wD, plan))
    reports.append(check_nonneg(dec, plan))
    for label, rep in zip(["V"] + ["decrease"] * (len(reports) - 1), reports):
        out.write(f"[{label}] {rep.to_text()}\n")
    ok = all(r.passed for r in reports)
    out.write("kernel: PASS\n" if ok else "kernel: FAIL\n")
    return EXIT_OK if ok else EXIT_INVALID


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    handler = {"synth": cmd_synth, "check": cmd_check, "kernel": cmd_kernel}[args.command]
    try:
        return handler(args, out)
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
