"""Conditional, weak and partial symmetries of PDEs.

Typical use::

    from condsym import parse_problem, classify

    doc = parse_problem(open("problems/shifted.prob").read())
    report = classify(doc.field("Ft"), doc.problem(), with_reduction=True)
"""

from .canonical import (
    CoordinateChange,
    coordinate_change,
    derive_canonical_coordinates,
    lift_solution,
    reduce,
    s_form_decompose,
    transform_pde,
    validate_coordinates,
)
from .classify import (
    ClassificationReport,
    PdeProblem,
    check_exact,
    check_invariance,
    check_partial,
    classify,
    delta_chain,
    partial_report,
)
from .jetspace import JetContext, MultiIndex, build_manifold, close_rules, restrict, total_derivative
from .kernel import is_zero, normalize, to_text
from .liefield import VectorField, prolong
from .parse_io import emit_report, parse_expression, parse_problem
from .verify import ExplicitSolution, certify, verify_invariance_of_solution, verify_solution

__version__ = "0.1.0"

__all__ = [
    "ClassificationReport",
    "CoordinateChange",
    "ExplicitSolution",
    "JetContext",
    "MultiIndex",
    "PdeProblem",
    "VectorField",
    "build_manifold",
    "certify",
    "check_exact",
    "check_invariance",
    "check_partial",
    "classify",
    "close_rules",
    "coordinate_change",
    "delta_chain",
    "derive_canonical_coordinates",
    "emit_report",
    "is_zero",
    "lift_solution",
    "normalize",
    "parse_expression",
    "parse_problem",
    "partial_report",
    "prolong",
    "reduce",
    "restrict",
    "s_form_decompose",
    "to_text",
    "total_derivative",
    "transform_pde",
    "validate_coordinates",
    "verify_invariance_of_solution",
    "verify_solution",
]
