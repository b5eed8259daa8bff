"""Theoretical error bounds, modulus-of-continuity estimation and reports.

All bound calculators take the activation parameters and a
:class:`BoundQuery` and return plain floats. ``compare`` joins a bound with
the matching empirical quantity computed by the operators module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .activation import ActivationParams, DensityKernel
from .exceptions import DomainError, PreconditionError, SpecificationError
from .operators import (
    DIRECT,
    KINDS,
    IterationPlan,
    OperatorSpec,
    TargetFunction,
    apply,
    centered_moment,
)
from .quadrature import QuadratureConfig

__all__ = [
    "BoundQuery",
    "BoundReport",
    "TaylorBound",
    "estimate_modulus",
    "modulus_from_samples",
    "modulus",
    "tail_bound",
    "bound_T",
    "bound_E",
    "bound_for_kind",
    "bound_derivative",
    "moment_bound",
    "centered_moment_bound",
    "bound_taylor",
    "bound_taylor_derivative",
    "taylor_remainder",
    "iterated_bound",
    "compare",
]

MODULUS_WINDOW = (-5.0, 5.0)
MODULUS_STEP = 1e-3
#: A run is conclusive when the quadrature error is this many times below the bound.
CONCLUSIVE_FACTOR = 100.0
RATIO_SLACK = 1e-3


@dataclass(frozen=True)
class BoundQuery:
    """Parameters of one bound evaluation.

    ``k`` is the derivative order (0 for plain bounds) and ``N`` the Taylor
    order (0 for the Jackson-type bounds). Construction enforces
    ``n^(1 - alpha) > 2``.
    """

    alpha: float
    n: int
    kind: str = DIRECT
    k: int = 0
    N: int = 0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise PreconditionError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.n) != self.n or self.n < 1:
            raise PreconditionError(f"n must be a positive integer, got {self.n}")
        if self.kind not in KINDS:
            raise SpecificationError(f"unknown operator kind {self.kind!r}")
        if self.k < 0 or self.N < 0:
            raise SpecificationError("k and N must be nonnegative")
        if not self.n ** (1.0 - self.alpha) > 2.0:
            raise PreconditionError(
                f"n^(1-alpha) = {self.n ** (1.0 - self.alpha):.6g} must exceed 2 (n={self.n}, alpha={self.alpha})"
            )

    @property
    def reach(self) -> float:
        """``n^(1 - alpha)``, the radius splitting near and far kernel mass."""
        return self.n ** (1.0 - self.alpha)

    @property
    def theta(self) -> float:
        """Modulus argument: ``n^-alpha`` (direct) or ``1/n + n^-alpha``."""
        base = self.n ** -self.alpha
        return base if self.kind == DIRECT else 1.0 / self.n + base


@dataclass(frozen=True)
class BoundReport:
    empirical: float
    theoretical: float
    ratio: float
    conclusive: bool
    quad_error: float
    parameters: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.conclusive or self.ratio <= 1.0 + RATIO_SLACK


@dataclass(frozen=True)
class TaylorBound:
    remainder_bound: float
    moment_bounds: tuple
    full_bound: float


def modulus_from_samples(values, step: float, theta: float) -> float:
    """Largest ``|v_i - v_j|`` over sample pairs at most ``theta`` apart.

    Equals the max over sliding windows of ``floor(theta/step) + 1`` samples
    of (window max - window min).
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DomainError("empty sample grid")
    lag = int(math.floor(theta / step * (1.0 + 1e-12)))
    lag = min(lag, values.size - 1)
    if lag <= 0:
        return 0.0
    size = lag + 1
    origin = -(size // 2) + (0 if size % 2 else 1)
    hi = maximum_filter1d(values, size, mode="nearest", origin=origin)
    lo = minimum_filter1d(values, size, mode="nearest", origin=origin)
    # Windows starting in the last `lag` samples are truncated; they only see
    # pairs already covered, and mode="nearest" repeats the end value.
    return float(np.max(hi - lo))


def _grid(window, step):
    a, b = (float(v) for v in window)
    if not (math.isfinite(a) and math.isfinite(b) and b >= a):
        raise DomainError(f"invalid window {window!r}")
    if not step > 0:
        raise DomainError("step must be positive")
    count = int(round((b - a) / step)) + 1
    return np.linspace(a, b, count), (b - a) / (count - 1) if count > 1 else step


def estimate_modulus(f, theta: float, window=MODULUS_WINDOW, step: float = MODULUS_STEP) -> float:
    """Grid estimate of ``omega(f, theta)`` restricted to ``window``.

    A lower bound of the true modulus on the window; nondecreasing in
    ``theta`` on a fixed grid.
    """
    if not theta > 0:
        raise DomainError("theta must be positive")
    if step > theta:
        raise DomainError(f"step {step} exceeds theta {theta}")
    xs, h = _grid(window, step)
    return modulus_from_samples(np.asarray(f(xs), dtype=float), h, theta)


def modulus(f: TargetFunction, theta: float, window=MODULUS_WINDOW, step: float = MODULUS_STEP) -> float:
    """``omega(f, theta)``: exact when declared, else the grid estimator."""
    if f.exact_modulus is not None:
        return float(f.exact_modulus(theta))
    return estimate_modulus(f, theta, window, min(step, theta))


def tail_bound(params: ActivationParams, reach: float) -> float:
    """``(q + 1/q) / B^(beta (reach - 1))``, the kernel mass bound beyond ``reach``."""
    return params.q_sum * math.exp(-params.rate * (reach - 1.0))


def _jackson(f, query, params, theta, **mod_kw):
    return modulus(f, theta, **mod_kw) + 2.0 * f.sup_norm * tail_bound(params, query.reach)


def bound_T(f: TargetFunction, query: BoundQuery, params: ActivationParams, **mod_kw) -> float:
    """``omega(f, n^-alpha) + 2 (q + 1/q) ||f|| / B^(beta (n^(1-alpha) - 1))``."""
    if query.kind != DIRECT:
        raise SpecificationError("bound_T belongs to the direct operator")
    return _jackson(f, query, params, query.n ** -query.alpha, **mod_kw)


def bound_E(f: TargetFunction, query: BoundQuery, params: ActivationParams, **mod_kw) -> float:
    """Same as ``bound_T`` with modulus argument ``1/n + n^-alpha``."""
    if query.kind == DIRECT:
        raise SpecificationError("bound_E belongs to the Kantorovich and quadrature operators")
    return _jackson(f, query, params, 1.0 / query.n + query.n ** -query.alpha, **mod_kw)


def bound_for_kind(f, query, params, **mod_kw):
    return (bound_T if query.kind == DIRECT else bound_E)(f, query, params, **mod_kw)


def bound_derivative(f: TargetFunction, query: BoundQuery, params: ActivationParams, **mod_kw) -> float:
    """``T_k`` / ``E_k``: the Jackson bound evaluated on ``f^(k)``."""
    if query.k < 1:
        raise SpecificationError("bound_derivative needs k >= 1")
    return bound_for_kind(f.derivative(query.k), query, params, **mod_kw)


def moment_bound(params: ActivationParams, k: int) -> float:
    """Closed-form majorant of the absolute moment ``int |h|^k psi(h) dh``."""
    if int(k) != k or k < 1:
        raise DomainError("k must be a positive integer")
    near = math.tanh(0.5 * params.rate) / (k + 1)
    far = params.q_sum * params.base**params.beta * math.factorial(k) / params.rate**k
    return near + far


def centered_moment_bound(params: ActivationParams, kind: str, n: int, k: int) -> float:
    """Bound on ``|Op((. - x)^k)(x)|`` for the given operator kind."""
    if kind == DIRECT:
        return moment_bound(params, k) / n**k
    return 2 ** (k - 1) / n**k * (1.0 + moment_bound(params, k))


def _remainder_bound(g, query, params, **mod_kw):
    """Taylor remainder bound for order ``N`` given ``g = f^(N)``."""
    N, n, p = query.N, query.n, params
    B_beta = p.base**p.beta
    decay = math.exp(-p.rate * query.reach / 2.0)
    if query.kind == DIRECT:
        theta = n ** -query.alpha
        near = modulus(g, theta, **mod_kw) / (n ** (query.alpha * N) * math.factorial(N))
        far = 2 ** (N + 2) * g.sup_norm * B_beta * p.q_sum / (n**N * p.beta**N) * decay
    else:
        theta = 1.0 / n + n ** -query.alpha
        near = modulus(g, theta, **mod_kw) * theta**N / math.factorial(N)
        far = (
            2**N * g.sup_norm / (n**N * math.factorial(N)) * p.q_sum * B_beta
            * (1.0 + 2 ** (N + 1) * math.factorial(N) / p.beta**N) * decay
        )
    return near + far


def bound_taylor(f: TargetFunction, query: BoundQuery, params: ActivationParams, x: Optional[float] = None, **mod_kw) -> TaylorBound:
    """Taylor-order bounds for ``Op f - f``.

    ``remainder_bound`` bounds ``|Op f(x) - f(x) - sum_k f^(k)(x)/k! Op((.-x)^k)(x)|``;
    ``moment_bounds[k-1]`` bounds the k-th centered moment; ``full_bound``
    adds the moment terms weighted by ``|f^(k)(x)|/k!`` (or by ``||f^(k)||/k!``
    when ``x`` is None).
    """
    N = query.N
    if N < 1:
        raise SpecificationError("bound_taylor needs N >= 1")
    if f.order < N:
        raise SpecificationError(f"{f.label} carries only {f.order} derivatives; N = {N} requested")
    remainder = _remainder_bound(f.derivative(N), query, params, **mod_kw)
    moments = tuple(centered_moment_bound(params, query.kind, query.n, k) for k in range(1, N + 1))
    total = remainder
    for k in range(1, N + 1):
        g = f.derivative(k)
        weight = g.sup_norm if x is None else abs(float(g(x)))
        total += weight / math.factorial(k) * moments[k - 1]
    return TaylorBound(remainder, moments, total)


def bound_taylor_derivative(f: TargetFunction, query: BoundQuery, params: ActivationParams, x: Optional[float] = None, **mod_kw) -> TaylorBound:
    """``bound_taylor`` applied to ``f^(k)`` with ``k = query.k``."""
    if f.order < query.N + query.k:
        raise SpecificationError(f"{f.label} needs derivatives up to order {query.N + query.k}")
    return bound_taylor(f.derivative(query.k), query, params, x, **mod_kw)


def taylor_remainder(f: TargetFunction, spec: OperatorSpec, x, N: int, kernel: DensityKernel, config: QuadratureConfig = None):
    """Empirical ``|Op f(x) - f(x) - sum_{k<=N} f^(k)(x)/k! Op((.-x)^k)(x)|``.

    Returns ``(value, quad_error)``; both are floats for scalar ``x`` and
    arrays for a 1-D grid. The centered moments do not depend on ``x`` (every
    operator kind is translation invariant), so they are computed once.
    """
    config = config or QuadratureConfig()
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    op = apply(f, spec, xs, kernel, config, with_error=True)
    total = op.value - f(xs)
    error = np.array(op.error, dtype=float)
    for k in range(1, N + 1):
        m = centered_moment(spec, 0.0, k, kernel, config, with_error=True)
        coeff = f.derivative(k)(xs) / math.factorial(k)
        total = total - coeff * m.value
        error = error + np.abs(coeff) * m.error
    if scalar:
        return float(abs(total[0])), float(error[0])
    return np.abs(total), error


def iterated_bound(f: TargetFunction, plan: IterationPlan, params: ActivationParams, alpha: float, **mod_kw) -> float:
    """Sum of the single-stage Jackson bounds over the chain.

    For an r-fold power of one operator this is ``r`` times its bound.
    """
    total = 0.0
    for spec in plan.chain:
        total += bound_for_kind(f, BoundQuery(alpha, spec.n, spec.kind), params, **mod_kw)
    return total


def compare(f: TargetFunction, spec: OperatorSpec, query: BoundQuery, grid, kernel: DensityKernel, config: QuadratureConfig = None, **mod_kw) -> BoundReport:
    """Empirical grid sup of the deviation matched against its theoretical bound.

    ``query.N == 0`` compares ``sup |(Op f)^(k) - f^(k)|`` (``k = query.k``,
    computed as ``Op(f^(k)) - f^(k)``) with ``T_k``/``E_k``; ``query.N >= 1``
    compares the largest Taylor remainder over the grid with the remainder
    bound.
    """
    config = config or QuadratureConfig()
    if query.kind != spec.kind or query.n != spec.n:
        raise SpecificationError("query and operator spec disagree on kind or n")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    params = kernel.params
    g = f.derivative(query.k)
    if query.N == 0:
        res = apply(g, spec, grid, kernel, config, with_error=True)
        empirical = float(np.max(np.abs(res.value - g(grid))))
        quad_error = float(np.max(res.error))
        theoretical = bound_for_kind(g, query, params, **mod_kw)
    else:
        values, errors = taylor_remainder(g, spec, grid, query.N, kernel, config)
        empirical = float(np.max(values))
        quad_error = float(np.max(errors))
        theoretical = bound_taylor(g, query, params, **mod_kw).remainder_bound
    conclusive = CONCLUSIVE_FACTOR * quad_error <= theoretical
    ratio = empirical / theoretical if theoretical > 0 else (0.0 if empirical == 0 else math.inf)
    parameters = {
        "q": params.q,
        "beta": params.beta,
        "B": params.base,
        "n": query.n,
        "alpha": query.alpha,
        "kind": query.kind,
        "k": query.k,
        "N": query.N,
        "label": f.label,
        "grid": (float(grid[0]), float(grid[-1]), int(grid.size)),
        "tail_epsilon": config.tail_epsilon,
        "rel_tol": config.rel_tol,
    }
    return BoundReport(empirical, theoretical, ratio, conclusive, quad_error, parameters)
