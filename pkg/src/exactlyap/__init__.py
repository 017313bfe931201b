"""Exact rational SOS Lyapunov certificates for polynomial and rational systems."""
from .exactnum import Rational, parse_rational, rat
from .formats import read_certificate, read_system, write_certificate
from .lyapunov import (
    LyapunovCertificate,
    NoCertificateFound,
    PolySystem,
    Status,
    SynthParams,
    Verdict,
    check_lyapunov,
    decrease_polynomial,
    exact_lyapunov,
    setup_sdp_k,
)
from .poly import Polynomial, poly_parse, poly_print
from .sos import IntsosParams, WeightedSosCertificate, intsos, verify_certificate

__all__ = [
    "IntsosParams",
    "LyapunovCertificate",
    "NoCertificateFound",
    "PolySystem",
    "Polynomial",
    "Rational",
    "Status",
    "SynthParams",
    "Verdict",
    "WeightedSosCertificate",
    "check_lyapunov",
    "decrease_polynomial",
    "exact_lyapunov",
    "intsos",
    "parse_rational",
    "poly_parse",
    "poly_print",
    "rat",
    "read_certificate",
    "read_system",
    "setup_sdp_k",
    "verify_certificate",
    "write_certificate",
]
