"""The three convolution-type neural network operators.

With the substitution ``h = n x - v`` all three operators become integrals
against ``psi(h) dh``:

* direct:       ``A_n f(x)  = int f(x - h/n) psi(h) dh``
* Kantorovich:  ``A*_n f(x) = int n int_0^{1/n} f(t + x - h/n) dt psi(h) dh``
* quadrature:   ``Ā_n f(x)  = int sum_s w_s f(x - h/n + s/(n r)) psi(h) dh``

so one truncation window serves every ``x`` and ``n``. Inputs ``x`` may be
scalars or 1-D arrays; arrays are pushed through the quadrature engine as a
batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import comb

from .activation import DensityKernel
from .exceptions import BudgetExceededError, SpecificationError, ToleranceNotMetError
from .quadrature import (
    GAUSS_NODES,
    QuadratureConfig,
    _gauss_legendre,
    _panel_edges,
    _rule,
    integrate_weighted,
    truncation_radius,
)

__all__ = [
    "DIRECT",
    "KANTOROVICH",
    "QUADRATURE",
    "KINDS",
    "TargetFunction",
    "OperatorSpec",
    "IterationPlan",
    "OperatorValue",
    "CommutationCheck",
    "apply",
    "apply_direct",
    "apply_kantorovich",
    "apply_quadrature_op",
    "centered_moment",
    "derivative_commutation_check",
    "apply_iterated",
]

DIRECT = "direct"
KANTOROVICH = "kantorovich"
QUADRATURE = "quadrature"
KINDS = (DIRECT, KANTOROVICH, QUADRATURE)

#: Gauss rule used for the inner average of the Kantorovich operator.
INNER_NODES = 6
#: Upper bound on batch_size * nodes * inner_nodes held in memory at once.
CHUNK_ELEMENTS = 2_000_000
DEFAULT_BUDGET = 1_000_000_000


@dataclass(frozen=True)
class TargetFunction:
    """A real function the operators act on.

    Parameters
    ----------
    func : callable
        Vectorized evaluator.
    sup_norm : float
        Declared bound on ``|func|``; for unbounded functions such as the
        identity this is a bound over the window actually probed.
    derivatives : sequence of callables, optional
        Evaluators of ``f', f'', ...`` (contiguous from order 1).
    derivative_norms : sequence of float, optional
        Declared sup-norms of the derivatives, same length as ``derivatives``.
    exact_modulus : callable, optional
        ``theta -> omega(f, theta)`` when known in closed form.
    derivative_moduli : sequence, optional
        Closed-form moduli of the derivatives (``None`` entries allowed).
    label : str
    breakpoints : callable, optional
        ``(a, b) -> array`` of points in ``[a, b]`` where ``f`` has a kink.
        Quadrature panels are aligned with them.
    """

    func: Callable
    sup_norm: float
    derivatives: Sequence[Callable] = ()
    derivative_norms: Sequence[float] = ()
    exact_modulus: Optional[Callable] = None
    derivative_moduli: Sequence[Optional[Callable]] = ()
    label: str = "f"
    breakpoints: Optional[Callable] = None

    def __post_init__(self):
        object.__setattr__(self, "derivatives", tuple(self.derivatives))
        object.__setattr__(self, "derivative_norms", tuple(float(v) for v in self.derivative_norms))
        object.__setattr__(self, "derivative_moduli", tuple(self.derivative_moduli))
        if not (self.sup_norm >= 0 and math.isfinite(self.sup_norm)):
            raise SpecificationError(f"{self.label}: sup_norm must be finite and >= 0")
        if len(self.derivative_norms) != len(self.derivatives):
            raise SpecificationError(f"{self.label}: one sup-norm is needed per derivative")
        if len(self.derivative_moduli) > len(self.derivatives):
            raise SpecificationError(f"{self.label}: more derivative moduli than derivatives")
        if any(not (v >= 0 and math.isfinite(v)) for v in self.derivative_norms):
            raise SpecificationError(f"{self.label}: derivative norms must be finite and >= 0")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.func(x), dtype=float), x.shape)

    @property
    def order(self) -> int:
        """Highest derivative order available."""
        return len(self.derivatives)

    def derivative(self, k: int) -> "TargetFunction":
        """``f^(k)`` as a target function (``k = 0`` returns ``self``)."""
        if k == 0:
            return self
        if k < 0 or k > self.order:
            raise SpecificationError(f"{self.label}: derivative of order {k} is not available")
        moduli = self.derivative_moduli
        return TargetFunction(
            func=self.derivatives[k - 1],
            sup_norm=self.derivative_norms[k - 1],
            derivatives=self.derivatives[k:],
            derivative_norms=self.derivative_norms[k:],
            exact_modulus=moduli[k - 1] if k <= len(moduli) else None,
            derivative_moduli=moduli[k:],
            label=f"{self.label}^({k})",
        )


@dataclass(frozen=True)
class OperatorSpec:
    """Which operator, at which scale ``n``, with which quadrature weights."""

    kind: str
    n: int
    weights: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecificationError(f"unknown operator kind {self.kind!r}; expected one of {KINDS}")
        if int(self.n) != self.n or self.n < 1:
            raise SpecificationError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.kind == QUADRATURE:
            if not self.weights:
                raise SpecificationError("the quadrature operator needs a nonempty weight vector")
            w = tuple(float(v) for v in self.weights)
            if any(not (v >= 0 and math.isfinite(v)) for v in w):
                raise SpecificationError("quadrature weights must be finite and nonnegative")
            if abs(math.fsum(w) - 1.0) > 1e-12:
                raise SpecificationError(f"quadrature weights must sum to 1, got {math.fsum(w)!r}")
            object.__setattr__(self, "weights", w)
        elif self.weights is not None:
            raise SpecificationError(f"weights only apply to the quadrature kind, not {self.kind!r}")

    @property
    def r(self) -> int:
        return len(self.weights) if self.weights else 0


@dataclass(frozen=True)
class IterationPlan:
    """Operators applied innermost-first: ``chain[0]`` acts on ``f`` first."""

    chain: Sequence[OperatorSpec]
    monotone: bool = False

    def __post_init__(self):
        chain = tuple(self.chain)
        if not chain:
            raise SpecificationError("an iteration plan needs at least one operator")
        if not all(isinstance(s, OperatorSpec) for s in chain):
            raise SpecificationError("chain entries must be OperatorSpec instances")
        if self.monotone and any(a.n > b.n for a, b in zip(chain, chain[1:])):
            raise SpecificationError("a monotone plan needs nondecreasing scales k_1 <= ... <= k_r")
        object.__setattr__(self, "chain", chain)

    @classmethod
    def power(cls, spec: OperatorSpec, r: int) -> "IterationPlan":
        return cls((spec,) * r, monotone=True)

    @property
    def depth(self) -> int:
        return len(self.chain)


@dataclass(frozen=True)
class OperatorValue:
    value: object
    error: object


@dataclass(frozen=True)
class CommutationCheck:
    lhs: float
    rhs: float
    tolerance: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


@lru_cache(maxsize=None)
def _inner_rule(n):
    # Nodes on [0, 1/n]; weights already include the leading factor n.
    x, w = _gauss_legendre(INNER_NODES)
    return (x + 1.0) / (2.0 * n), 0.5 * w


def _offsets(spec):
    """Shifts ``c_j`` and weights ``a_j`` with ``Op f(x) = sum_j a_j int f(x - h/n + c_j) psi``."""
    if spec.kind == DIRECT:
        return np.zeros(1), np.ones(1)
    if spec.kind == KANTOROVICH:
        return _inner_rule(spec.n)
    r = spec.r
    return np.arange(1, r + 1) / (spec.n * r), np.asarray(spec.weights)


def _smooth_integrand(f, spec, x):
    shifts, coeffs = _offsets(spec)
    n = spec.n

    def g(h):
        out = np.empty((x.size, h.size))
        rows = max(1, CHUNK_ELEMENTS // max(1, h.size * shifts.size))
        for start in range(0, x.size, rows):
            xs = x[start:start + rows]
            pts = xs[:, None, None] - h[None, :, None] / n + shifts
            out[start:start + rows] = f(pts) @ coeffs
        return out

    return g


def _kinks_near(f, x, spec, radius):
    span = (radius + 2.0) / spec.n + 1.0 / spec.n
    b = np.asarray(f.breakpoints(x - span, x + span), dtype=float).ravel()
    return np.sort(b)


def _kinked_value(f, spec, x, kernel, config, radius):
    """Single-point evaluation with panels (and inner intervals) split at kinks."""
    n = spec.n
    kinks = _kinks_near(f, x, spec, radius)
    if kinks.size == 0:
        return integrate_weighted(kernel, lambda h: _smooth_integrand(f, spec, np.array([x]))(h)[0], config)
    base = n * (x - kinks)
    if spec.kind == DIRECT:
        hk = base
    elif spec.kind == KANTOROVICH:
        hk = np.concatenate([base, base + 1.0])
    else:
        hk = (base[:, None] + np.arange(1, spec.r + 1) / spec.r).ravel()

    if spec.kind != KANTOROVICH:
        g = lambda h: _smooth_integrand(f, spec, np.array([x]))(h)[0]  # noqa: E731
    else:
        gx, gw = _gauss_legendre(INNER_NODES)
        width = 1.0 / n

        sparse = kinks.size < 2 or np.min(np.diff(kinks)) > width

        def g(h):
            # Inner interval [0, 1/n] cut where t + x - h/n crosses a kink.
            start = x - h / n
            if sparse:
                # At most one kink per inner interval: cut at the first one to the right.
                idx = np.minimum(np.searchsorted(kinks, start), kinks.size - 1)
                cuts = np.clip(kinks[idx] - start, 0.0, width)[:, None]
            else:
                cuts = np.clip(kinks[None, :] - start[:, None], 0.0, width)
            bounds = np.concatenate([np.zeros((h.size, 1)), cuts, np.full((h.size, 1), width)], axis=1)
            lo, hi = bounds[:, :-1], bounds[:, 1:]
            half = 0.5 * (hi - lo)
            t = (lo + half)[..., None] + half[..., None] * gx
            vals = f(t + start[:, None, None])
            return n * np.einsum("hkj,hk,j->h", vals, half, gw)

    return integrate_weighted(kernel, g, config, breakpoints=hk)


def apply(f: TargetFunction, spec: OperatorSpec, x, kernel: DensityKernel, config: QuadratureConfig = None, with_error: bool = False):
    """Evaluate ``Op f`` at ``x`` (scalar or 1-D array).

    Returns the value(s), or an :class:`OperatorValue` carrying the
    quadrature error estimate when ``with_error`` is true.
    """
    config = config or QuadratureConfig()
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if xs.ndim != 1:
        raise SpecificationError("x must be a scalar or a 1-D array")
    if f.breakpoints is None:
        res = integrate_weighted(kernel, _smooth_integrand(f, spec, xs), config)
        value = np.atleast_1d(res.value)
        error = np.atleast_1d(res.error)
    else:
        radius = truncation_radius(kernel.params, config.tail_epsilon).radius
        parts = [_kinked_value(f, spec, float(xi), kernel, config, radius) for xi in xs]
        value = np.array([p.value for p in parts])
        error = np.array([p.error for p in parts])
    if scalar:
        value, error = float(value[0]), float(error[0])
    return OperatorValue(value, error) if with_error else value


def apply_direct(f, n, x, kernel, config=None):
    """``A_n f(x) = int f(x - h/n) psi(h) dh``."""
    return apply(f, OperatorSpec(DIRECT, n), x, kernel, config)


def apply_kantorovich(f, n, x, kernel, config=None):
    """``A*_n f(x)``: the inner average ``n int_0^{1/n} f(t + x - h/n) dt`` uses a 6-point Gauss rule."""
    return apply(f, OperatorSpec(KANTOROVICH, n), x, kernel, config)


def apply_quadrature_op(f, spec, x, kernel, config=None):
    if spec.kind != QUADRATURE:
        raise SpecificationError("apply_quadrature_op needs an OperatorSpec of quadrature kind")
    return apply(f, spec, x, kernel, config)


def _window_reach(spec, kernel, config):
    radius = truncation_radius(kernel.params, config.tail_epsilon).radius
    return (radius + 1.0) / spec.n


def centered_moment(spec: OperatorSpec, x, k: int, kernel: DensityKernel, config: QuadratureConfig = None, with_error=False):
    """``Op((. - x)^k)(x)``, the k-th centered moment of the operator at ``x``."""
    if int(k) != k or k < 1:
        raise SpecificationError(f"moment order must be a positive integer, got {k!r}")
    config = config or QuadratureConfig()
    x = float(x)
    reach = _window_reach(spec, kernel, config)
    power = TargetFunction(lambda y: (y - x) ** k, sup_norm=reach**k, label=f"(.-x)^{k}")
    return apply(power, spec, x, kernel, config, with_error=with_error)


def _fd_step(k, rel_tol):
    return max(1e-5, rel_tol ** (1.0 / (k + 2)))


def _central_difference(values, k, step):
    coeffs = np.array([(-1) ** i * comb(k, i, exact=True) for i in range(k + 1)], dtype=float)
    return float(coeffs @ values) / step**k


def derivative_commutation_check(f: TargetFunction, spec: OperatorSpec, x: float, k: int, kernel: DensityKernel, config: QuadratureConfig = None) -> CommutationCheck:
    """Compare ``(Op f)^(k)(x)`` by central differences with ``Op(f^(k))(x)``.

    The tolerance is a Richardson-style truncation estimate (difference
    between steps ``h`` and ``2h``) plus the quadrature error amplified by the
    stencil, ``2^k err / h^k``.
    """
    config = config or QuadratureConfig()
    if int(k) != k or k < 1:
        raise SpecificationError(f"derivative order must be a positive integer, got {k!r}")
    if f.order < k:
        raise SpecificationError(f"{f.label} carries no derivative of order {k}")
    step = _fd_step(k, config.rel_tol)
    offsets = k / 2.0 - np.arange(k + 1)
    pts = np.concatenate([x + offsets * step, x + offsets * 2 * step])
    res = apply(f, spec, pts, kernel, config, with_error=True)
    fine = _central_difference(res.value[: k + 1], k, step)
    coarse = _central_difference(res.value[k + 1:], k, 2 * step)
    rhs = apply(f.derivative(k), spec, float(x), kernel, config, with_error=True)
    tolerance = abs(fine - coarse) + 2**k * float(np.max(res.error)) / step**k + rhs.error
    return CommutationCheck(fine, rhs.value, tolerance)


class _Stage:
    """Operator output materialized lazily as a function of arrays.

    Inner stages use a fixed rule (the level found by calibration) so that the
    nested cost stays a plain product of node counts.
    """

    def __init__(self, inner, spec, kernel, config, level):
        self.inner = inner
        self.spec = spec
        self.kernel = kernel
        radius = truncation_radius(kernel.params, config.tail_epsilon).radius
        edges = _panel_edges(-radius, radius, config.panel_width, None)
        nodes, weights = _rule(edges, level)
        self.nodes = nodes
        self.kw = kernel.psi(nodes) * weights

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        flat = y.ravel()
        shifts, coeffs = _offsets(self.spec)
        out = np.empty(flat.size)
        rows = max(1, CHUNK_ELEMENTS // (self.nodes.size * shifts.size))
        for start in range(0, flat.size, rows):
            xs = flat[start:start + rows]
            pts = xs[:, None, None] - self.nodes[None, :, None] / self.spec.n + shifts
            out[start:start + rows] = (self.inner(pts) @ coeffs) @ self.kw
        return out.reshape(y.shape)


def _stage_cost(spec, kernel, config, level):
    radius = truncation_radius(kernel.params, config.tail_epsilon).radius
    panels = _panel_edges(-radius, radius, config.panel_width, None).size - 1
    return panels * 2**level * GAUSS_NODES * _offsets(spec)[0].size


LATTICE_STEP = 0.5
LATTICE_HALVINGS = 6
KERNEL_GAUSS = 20


def _lattice_kernel(spec, kernel, u):
    """Density of ``u`` in ``Op f(x) = int f(x - u/n) K(u) du`` for each kind.

    Kantorovich averages ``psi`` over a unit window, the quadrature kind mixes
    shifted copies; both stay analytic in a strip around the real axis.
    """
    if spec.kind == DIRECT:
        return kernel.psi(u)
    if spec.kind == KANTOROVICH:
        t, w = _gauss_legendre(KERNEL_GAUSS)
        return kernel.psi(u[:, None] + 0.5 * (t + 1.0)) @ (0.5 * w)
    r = spec.r
    shifts = np.arange(1, r + 1) / r
    return kernel.psi(u[:, None] + shifts) @ np.asarray(spec.weights)


def _lattice_chain(f, chain, xs, kernel, radius, step):
    # All stages share the x-lattice spacing delta, so stage p uses the
    # u-step k_p * delta <= step and every node lands on an earlier node.
    delta = step / max(spec.n for spec in chain)
    stencils = []
    for spec in chain:
        du = spec.n * delta
        half = int(math.ceil((radius + 1.0) / du))
        u = np.arange(-half, half + 1) * du
        stencils.append(du * _lattice_kernel(spec, kernel, u))
    span = sum((w.size - 1) // 2 for w in stencils)
    offsets = np.arange(-span, span + 1) * delta
    out = np.empty(xs.size)
    for i, x in enumerate(xs):
        values = np.asarray(f(x + offsets), dtype=float)
        for w in stencils:
            values = np.convolve(values, w, mode="valid")
        out[i] = values[0]
    return out


def _apply_lattice(f, chain, xs, kernel, config):
    """Compose trapezoid rules on a shared lattice; halve the step until stable."""
    radius = truncation_radius(kernel.params, config.tail_epsilon).radius
    step = LATTICE_STEP
    previous = _lattice_chain(f, chain, xs, kernel, radius, step)
    for _ in range(LATTICE_HALVINGS):
        step *= 0.5
        current = _lattice_chain(f, chain, xs, kernel, radius, step)
        change = np.abs(current - previous)
        if np.all(change <= config.rel_tol * max(f.sup_norm, 1e-300)):
            tail = len(chain) * config.tail_epsilon * f.sup_norm
            return OperatorValue(current, change + tail)
        previous = current
    raise ToleranceNotMetError(
        f"lattice composition did not settle: change {float(np.max(change)):.3g}",
        best=current,
        error=change,
    )


def apply_iterated(f: TargetFunction, plan: IterationPlan, x_grid, kernel: DensityKernel, config: QuadratureConfig = None, budget: int = DEFAULT_BUDGET, with_error=False):
    """Evaluate the chain ``Op_{k_r}( ... Op_{k_1}(f))`` on ``x_grid``.

    For smooth ``f`` every kind is written as ``int f(x - u/n) K(u) du`` with
    an analytic ``K`` and each stage is a trapezoid sum on a lattice shared by
    all stages. Outer nodes then fall exactly on inner nodes, so the stages
    compose without interpolation, and trapezoid sums of analytic integrands
    converge geometrically. The step is halved until two passes agree.

    ``f`` with breakpoints is composed lazily instead: every outer node calls
    the inner stage, which runs the Gauss rule at the level calibrated on the
    innermost stage.

    Raises
    ------
    BudgetExceededError
        If the lazy path would need more than ``budget`` integrand calls.
    """
    config = config or QuadratureConfig()
    xs = np.atleast_1d(np.asarray(x_grid, dtype=float))
    chain = plan.chain
    if len(chain) == 1:
        res = apply(f, chain[0], xs, kernel, config, with_error=True)
        return res if with_error else res.value
    if f.breakpoints is None:
        res = _apply_lattice(f, chain, xs, kernel, config)
        return res if with_error else res.value

    center = float(xs[len(xs) // 2])
    calib = integrate_weighted(kernel, _smooth_integrand(f, chain[0], np.array([center])), config)
    level = calib.level

    cost = xs.size * 3
    for spec in chain:
        cost *= _stage_cost(spec, kernel, config, level)
    if cost > budget:
        raise BudgetExceededError(
            f"chain of depth {len(chain)} needs about {cost:.3g} integrand evaluations; budget is {budget:.3g}"
        )

    stage = f
    inner_error = 0.0
    for spec in chain[:-1]:
        stage_fn = _Stage(stage, spec, kernel, config, level)
        probe = np.array([center])
        try:
            target = stage if stage is f else TargetFunction(stage, f.sup_norm, label="stage")
            reference = apply(target, spec, probe, kernel, config, with_error=True)
        except ToleranceNotMetError as exc:
            reference = OperatorValue(exc.best, exc.error)
        # Fixed-rule error measured against the refined value at the probe.
        inner_error += float(np.max(np.abs(stage_fn(probe) - reference.value) + reference.error))
        stage = stage_fn
    outer = TargetFunction(stage, f.sup_norm, label=f"{f.label}-chain")
    res = apply(outer, chain[-1], xs, kernel, config, with_error=True)
    error = np.asarray(res.error) + inner_error
    return OperatorValue(res.value, error) if with_error else res.value
