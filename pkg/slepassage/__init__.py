"""slepassage - exact SLE(8/3) passage and bubble formulas with Monte Carlo and quadrature checks.

The package evaluates closed-form left-passage, bubble and two-path
probabilities, simulates the chordal Loewner flow to test them statistically,
and integrates the bubble area moments.
"""

from slepassage._version import __version__
from slepassage.errors import (
    ConvergenceError,
    DivergenceError,
    DomainError,
    ExpansionAccuracyWarning,
    InvariantViolationError,
    MethodDisagreementWarning,
    SchemaError,
    SlePassageError,
)
from slepassage.formulas import left_passage_one, left_passage_two
from slepassage.harness import run_martingale_test, run_one_point, run_two_point
from slepassage.models import (
    DriverPath,
    Estimate,
    ExperimentRecord,
    FlowState,
    HalfPlanePoint,
    IntegralResult,
    PassageOutcome,
    RunManifest,
    SimConfig,
)
from slepassage.quadrature import integrate_first_moment, integrate_second_moment
from slepassage.registry import formula, get_formula_registry
from slepassage.special import C0, G, hyp2f1
from slepassage.verify import CheckMessage, InvariantSuite

__all__ = [
    "__version__",
    "C0",
    "G",
    "hyp2f1",
    "left_passage_one",
    "left_passage_two",
    "formula",
    "get_formula_registry",
    "run_one_point",
    "run_two_point",
    "run_martingale_test",
    "integrate_first_moment",
    "integrate_second_moment",
    "InvariantSuite",
    "CheckMessage",
    "HalfPlanePoint",
    "SimConfig",
    "DriverPath",
    "FlowState",
    "PassageOutcome",
    "Estimate",
    "ExperimentRecord",
    "IntegralResult",
    "RunManifest",
    "SlePassageError",
    "DomainError",
    "ConvergenceError",
    "DivergenceError",
    "InvariantViolationError",
    "SchemaError",
    "ExpansionAccuracyWarning",
    "MethodDisagreementWarning",
]
