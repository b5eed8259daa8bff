"""Convolution-type neural network operators driven by a symmetrized,
q-deformed, beta-parametrized logistic density, with numeric checks of their
approximation bounds."""

from .activation import ActivationParams, DensityKernel, eval_G, eval_nu, eval_psi, psi_envelope
from .analysis import (
    BoundQuery,
    BoundReport,
    TaylorBound,
    bound_E,
    bound_T,
    bound_derivative,
    bound_for_kind,
    bound_taylor,
    bound_taylor_derivative,
    centered_moment_bound,
    compare,
    estimate_modulus,
    iterated_bound,
    modulus,
    moment_bound,
    tail_bound,
    taylor_remainder,
)
from .corpus import CORPUS_LABELS, build_corpus, make_target
from .estimator import OperatorApproximator
from .exceptions import (
    BudgetExceededError,
    DomainError,
    IntegrandError,
    PreconditionError,
    PsiOperatorsError,
    SpecificationError,
    ToleranceNotMetError,
)
from .operators import (
    DIRECT,
    KANTOROVICH,
    KINDS,
    QUADRATURE,
    IterationPlan,
    OperatorSpec,
    TargetFunction,
    apply,
    apply_direct,
    apply_iterated,
    apply_kantorovich,
    apply_quadrature_op,
    centered_moment,
    derivative_commutation_check,
)
from .quadrature import QuadratureConfig, QuadResult, integrate_weighted, tail_mass, truncation_radius

__version__ = "0.1.0"

__all__ = [
    "BoundQuery",
    "BoundReport",
    "TaylorBound",
    "bound_E",
    "bound_T",
    "bound_derivative",
    "bound_for_kind",
    "bound_taylor",
    "bound_taylor_derivative",
    "centered_moment_bound",
    "compare",
    "estimate_modulus",
    "iterated_bound",
    "modulus",
    "moment_bound",
    "tail_bound",
    "taylor_remainder",
    "BudgetExceededError",
    "DomainError",
    "IntegrandError",
    "PreconditionError",
    "PsiOperatorsError",
    "SpecificationError",
    "ToleranceNotMetError",
    "DIRECT",
    "KANTOROVICH",
    "KINDS",
    "QUADRATURE",
    "IterationPlan",
    "OperatorSpec",
    "TargetFunction",
    "apply",
    "apply_direct",
    "apply_iterated",
    "apply_kantorovich",
    "apply_quadrature_op",
    "centered_moment",
    "derivative_commutation_check",
    "ActivationParams",
    "DensityKernel",
    "eval_G",
    "eval_nu",
    "eval_psi",
    "psi_envelope",
    "CORPUS_LABELS",
    "build_corpus",
    "make_target",
    "OperatorApproximator",
    "QuadratureConfig",
    "QuadResult",
    "integrate_weighted",
    "tail_mass",
    "truncation_radius",
]
