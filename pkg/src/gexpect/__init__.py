"""Nonlinear (g-)expectations via backward stochastic differential equations."""

from .model import (
    AssumptionReport,
    Claim,
    EvaluationError,
    GeneratorFlags,
    GeneratorSpec,
    SamplingBox,
    TimeGrid,
    combine_claims,
    constant_claim,
    default_box,
    negate_claim,
    scale_claim,
    shift_claim,
    validate_assumptions,
)
from .gdsl import ParseError, parse_claim, parse_generator
from .solvers import (
    LatticeSolution,
    LsmcSolution,
    NumericError,
    PathBundle,
    PolynomialBasis,
    conditional_slice,
    simulate_paths,
    solve_lattice,
    solve_lsmc,
)
from .expectation import (
    AssumptionError,
    ConditionalSlice,
    GExpectationResult,
    conditional_g_expectation,
    g_expectation,
    indicator_factorization_check,
    tower_check,
)
from .representation import (
    RecoveryResult,
    limit_equivalence_check,
    local_average,
    recover_generator,
)
from .properties import (
    PropertyReport,
    TheoremConfig,
    TheoremVerdict,
    check_convexity,
    check_generator_side,
    check_positive_homogeneity,
    check_subadditivity,
    check_translation_invariance,
    default_claims,
    theorem_verdict,
    transform_identity_checks,
)
from .risk import ClassificationError, RiskClassification, classify, rho_dynamic, rho_static

__all__ = [
    "AssumptionError", "AssumptionReport", "Claim", "ClassificationError",
    "ConditionalSlice", "EvaluationError", "GExpectationResult",
    "GeneratorFlags", "GeneratorSpec", "LatticeSolution", "LsmcSolution",
    "NumericError", "ParseError", "PathBundle", "PolynomialBasis",
    "PropertyReport", "RecoveryResult", "RiskClassification", "SamplingBox",
    "TheoremConfig", "TheoremVerdict", "TimeGrid", "check_convexity",
    "check_generator_side", "check_positive_homogeneity",
    "check_subadditivity", "check_translation_invariance", "classify",
    "combine_claims", "conditional_g_expectation", "conditional_slice",
    "constant_claim", "default_box", "default_claims", "g_expectation",
    "indicator_factorization_check", "limit_equivalence_check",
    "local_average", "negate_claim", "parse_claim", "parse_generator",
    "recover_generator", "rho_dynamic", "rho_static", "scale_claim",
    "shift_claim", "simulate_paths", "solve_lattice", "solve_lsmc",
    "theorem_verdict", "tower_check", "transform_identity_checks",
    "validate_assumptions",
]

__version__ = "0.1.0"
