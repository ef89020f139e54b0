"""Complex iterates of holomorphic maps through a Riemann-Liouville differintegral.

The iterate ``phi^z(xi)`` is the order ``z - 1`` differintegral at 0 of the
auxiliary function ``theta(w) = sum phi^(k+1)(xi) w^k / k!``.  On top of that
sit tetration (``x -> alpha**x`` from 1) and a ladder of hyper-operators.
"""

from .differintegral import DifferintegralResult, EvalConfig, differintegral_at_zero
from .dynamics import Affine, ExpBase, FixedPointData, HyperStep, find_fixed_point, map_eval, orbit
from .errors import (
    BasinEscape,
    DegenerateMultiplier,
    DomainError,
    FracitError,
    NearIntegerPole,
    NoConvergence,
    NonIntegrable,
    NotConverged,
    PrecisionExhausted,
    QuadratureStall,
)
from .hyperops import build_level, hyper_eval, hyper_eval_result, verify_hyper_recursion, verify_hyper_shape
from .iteration import IterateResult, complex_iterate, iterate_result, period, verify_periodicity, verify_semigroup
from .koenigs import SchroderModel, koenigs_inverse, koenigs_iterate, koenigs_psi, schroder_model
from .numerics import PrecisionContext
from .tetration import tetrate, tetrate_result, verify_tetration
from .theta import ThetaSeries, build_theta, decay_scan

__all__ = [
    "DifferintegralResult",
    "EvalConfig",
    "differintegral_at_zero",
    "Affine",
    "ExpBase",
    "FixedPointData",
    "HyperStep",
    "find_fixed_point",
    "map_eval",
    "orbit",
    "BasinEscape",
    "DegenerateMultiplier",
    "DomainError",
    "FracitError",
    "NearIntegerPole",
    "NoConvergence",
    "NonIntegrable",
    "NotConverged",
    "PrecisionExhausted",
    "QuadratureStall",
    "build_level",
    "hyper_eval",
    "hyper_eval_result",
    "verify_hyper_recursion",
    "verify_hyper_shape",
    "IterateResult",
    "complex_iterate",
    "iterate_result",
    "period",
    "verify_periodicity",
    "verify_semigroup",
    "SchroderModel",
    "koenigs_inverse",
    "koenigs_iterate",
    "koenigs_psi",
    "schroder_model",
    "PrecisionContext",
    "tetrate",
    "tetrate_result",
    "verify_tetration",
    "ThetaSeries",
    "build_theta",
    "decay_scan",
]

__version__ = "0.1.0"
