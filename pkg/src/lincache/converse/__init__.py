"""Entropy-LP converse engine: universes, LPs, certificates."""

from .certificate import (
    Certificate,
    CertificateError,
    CheckResult,
    LinearBound,
    Rewrite,
    Step,
    check_certificate,
    load_certificate,
    parse_certificate,
)
from .expr import ExpressionError, parse_relation, parse_target
from .lp import EntropyLP, LPBuildError, Solution, Uncertified, build_lp, solve_and_certify
from .universe import TermClass, Universe, UniverseError, load_universe, parse_universe, term_classes
