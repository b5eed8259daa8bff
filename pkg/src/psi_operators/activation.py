"""Deformed, parametrized, base-B logistic activation and its density kernel.

Three functions are built on top of each other:

* ``nu(x) = 1 / (1 + q * B**(-beta * x))``, a skewed sigmoid,
* ``G(x) = (nu(x + 1) - nu(x - 1)) / 2``, a bump with unit mass,
* ``psi(x) = (G_q(x) + G_{1/q}(x)) / 2``, its even symmetrization.

All evaluations go through the exponent ``z = beta * x * ln(B) - ln(q)`` and
``scipy.special.expit`` so that no power of ``B`` is ever formed explicitly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .exceptions import DomainError

__all__ = [
    "ActivationParams",
    "DensityKernel",
    "eval_nu",
    "eval_G",
    "eval_psi",
    "psi_envelope",
]

#: Below this value of ln(B) every tail constant (all scale as 1/ln B) blows up.
SMALL_LOG_BASE = 1e-6


@dataclass(frozen=True)
class ActivationParams:
    """The triple ``(q, beta, base)``.

    Parameters
    ----------
    q : float
        Deformation, ``q > 0``.
    beta : float
        Steepness, ``beta > 0``.
    base : float
        Base ``B > 1`` of the exponential.
    """

    q: float
    beta: float
    base: float = math.e

    def __post_init__(self):
        for name in ("q", "beta", "base"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
                raise DomainError(f"{name} must be a finite real, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.q <= 0:
            raise DomainError(f"q must be positive, got {self.q}")
        if self.beta <= 0:
            raise DomainError(f"beta must be positive, got {self.beta}")
        if self.base <= 1:
            raise DomainError(f"base must exceed 1, got {self.base}")
        log_base = math.log(self.base)
        if not (math.isfinite(log_base) and log_base > 0):
            raise DomainError(f"ln(base) must be finite and positive, got {log_base}")
        if log_base < SMALL_LOG_BASE:
            warnings.warn(
                f"ln(base) = {log_base:.3g} is tiny; tail constants scale like 1/ln(base)",
                RuntimeWarning,
                stacklevel=2,
            )

    @property
    def log_base(self) -> float:
        return math.log(self.base)

    @property
    def rate(self) -> float:
        """Exponential decay rate ``beta * ln(B)`` of the kernel tails."""
        return self.beta * math.log(self.base)

    @property
    def q_sum(self) -> float:
        """``q + 1/q``, the constant in front of every tail estimate."""
        return self.q + 1.0 / self.q

    def mirrored(self) -> "ActivationParams":
        """Parameters with ``q`` replaced by ``1/q``."""
        return ActivationParams(1.0 / self.q, self.beta, self.base)


def _nu(params, x):
    return expit(params.rate * x - math.log(params.q))


def _bump(rate, log_q, x):
    # nu(a) - nu(b) = expit(a) expit(-b) (1 - exp(b - a)) keeps full relative
    # precision in both tails, where the naive difference cancels to zero.
    z = rate * np.asarray(x, dtype=float) - log_q
    return 0.5 * expit(z + rate) * expit(rate - z) * -math.expm1(-2.0 * rate)


def _G(params, x):
    return _bump(params.rate, math.log(params.q), x)


class DensityKernel:
    """The symmetrized density ``psi`` for fixed activation parameters.

    Derived constants are properties computed from ``params`` on access, so a
    kernel can never carry stale values.
    """

    __slots__ = ("params",)

    def __init__(self, params: ActivationParams):
        if not isinstance(params, ActivationParams):
            raise TypeError("params must be an ActivationParams instance")
        self.params = params

    def __repr__(self):
        p = self.params
        return f"DensityKernel(q={p.q!r}, beta={p.beta!r}, base={p.base!r})"

    @property
    def log_base(self) -> float:
        return self.params.log_base

    @property
    def max_location(self) -> float:
        """Location ``log_B(q) / beta`` of the maximum of ``G_q``."""
        p = self.params
        return math.log(p.q) / p.rate

    @property
    def max_value_G(self) -> float:
        """Maximum value ``(B^beta - 1) / (2 (B^beta + 1))`` of ``G_q``."""
        # (B^b - 1)/(B^b + 1) = tanh(b ln B / 2)
        return 0.5 * math.tanh(0.5 * self.params.rate)

    # Unchecked, vectorized evaluators for inner loops.
    def nu(self, x):
        return _nu(self.params, x)

    def G(self, x):
        return _G(self.params, x)

    def psi(self, x):
        p = self.params
        log_q = math.log(p.q)
        return 0.5 * (_bump(p.rate, log_q, x) + _bump(p.rate, -log_q, x))

    def envelope(self, x):
        """Exponential majorant of ``psi`` valid for ``x >= 1`` (no domain check)."""
        p = self.params
        return 0.5 * p.q_sum * p.rate * np.exp(-p.rate * (np.asarray(x, dtype=float) - 1.0))

    __call__ = psi


def _checked(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("x must be finite")
    return arr


def _result(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def eval_nu(params: ActivationParams, x):
    """Evaluate ``1 / (1 + q B^(-beta x))`` in overflow-safe sigmoid form."""
    return _result(_nu(params, _checked(x)))


def eval_G(params: ActivationParams, x):
    """Evaluate ``(nu(x + 1) - nu(x - 1)) / 2``."""
    return _result(_G(params, _checked(x)))


def eval_psi(params: ActivationParams, x):
    """Evaluate the even density ``(G_q + G_{1/q}) / 2``."""
    return _result(DensityKernel(params).psi(_checked(x)))


def psi_envelope(params: ActivationParams, x):
    """Return ``(q + 1/q)/2 * beta * ln(B) * B^(-beta (x - 1))``.

    This majorizes ``psi`` strictly on ``[1, inf)`` and is not defined (as a
    bound) to the left of 1.
    """
    arr = _checked(x)
    if np.any(arr < 1.0):
        raise DomainError("the envelope is only established for x >= 1")
    return _result(DensityKernel(params).envelope(arr))
