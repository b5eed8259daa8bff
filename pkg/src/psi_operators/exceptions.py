"""Exception hierarchy shared by every module of the package."""


class PsiOperatorsError(Exception):
    """Base class for all package errors."""


class DomainError(PsiOperatorsError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class SpecificationError(PsiOperatorsError, ValueError):
    """Inconsistent operator, target-function or study specification."""


class PreconditionError(PsiOperatorsError, ValueError):
    """A bound was requested outside its validity range (e.g. n^(1-alpha) <= 2)."""


class IntegrandError(PsiOperatorsError, FloatingPointError):
    """The integrand produced a non-finite value.

    Attributes
    ----------
    location : float
        Abscissa (in kernel coordinates) of the first offending node.
    """

    def __init__(self, message, location):
        super().__init__(message)
        self.location = location


class ToleranceNotMetError(PsiOperatorsError, ArithmeticError):
    """Refinement stopped at ``max_refinements`` without reaching ``rel_tol``.

    The best available estimate is kept on the exception so callers can decide
    whether it is still usable.
    """

    def __init__(self, message, best, error):
        super().__init__(message)
        self.best = best
        self.error = error


class BudgetExceededError(PsiOperatorsError, RuntimeError):
    """An iterated evaluation would need more integrand evaluations than allowed."""
