"""Composite Gauss-Legendre integration of psi-weighted integrands.

Every integral in the package has the form ``int g(h) psi(h) dh`` over the
real line. The line is truncated to ``[-R, R]`` where ``R`` comes from the
exponential tail estimate of the kernel, split into panels of fixed width and
integrated with a 10-point Gauss-Legendre rule per panel. Refinement halves
every panel (doubling the node count) until two consecutive levels agree.

Integrands are vectorized: ``g`` receives a 1-D array of nodes and returns an
array of shape ``(..., len(nodes))``. The leading axes form a batch, which is
how whole x-grids are pushed through a single call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .activation import ActivationParams, DensityKernel
from .exceptions import DomainError, IntegrandError, ToleranceNotMetError

__all__ = [
    "QuadratureConfig",
    "QuadResult",
    "TruncationWindow",
    "truncation_radius",
    "integrate_weighted",
    "integrate_interval",
    "tail_mass",
]

GAUSS_NODES = 10
#: Hard cap on nodes per refinement level; beyond it refinement gives up.
MAX_NODES = 4_000_000


@dataclass(frozen=True)
class QuadratureConfig:
    tail_epsilon: float = 1e-12
    rel_tol: float = 1e-10
    max_refinements: int = 20
    panel_width: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.tail_epsilon <= 1e-6):
            raise DomainError(f"tail_epsilon must lie in (0, 1e-6], got {self.tail_epsilon}")
        if not (self.rel_tol > 0.0 and math.isfinite(self.rel_tol)):
            raise DomainError(f"rel_tol must be positive, got {self.rel_tol}")
        if int(self.max_refinements) != self.max_refinements or self.max_refinements < 1:
            raise DomainError(f"max_refinements must be an integer >= 1, got {self.max_refinements}")
        if not (self.panel_width > 0.0 and math.isfinite(self.panel_width)):
            raise DomainError(f"panel_width must be positive, got {self.panel_width}")


@dataclass(frozen=True)
class TruncationWindow:
    radius: float


@dataclass(frozen=True)
class QuadResult:
    """Integral estimate together with its error budget.

    ``value`` and ``error`` are floats for scalar integrands and arrays when
    the integrand carries batch axes.
    """

    value: object
    error: object
    level: int
    radius: float


@lru_cache(maxsize=None)
def _gauss_legendre(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def truncation_radius(params: ActivationParams, tail_epsilon: float) -> TruncationWindow:
    """Radius ``R`` with ``(q + 1/q) B^(-beta (R - 1)) = tail_epsilon``.

    Because the kernel mass outside ``[-R, R]`` is strictly below the left-hand
    side, it is strictly below ``tail_epsilon``.
    """
    if not (tail_epsilon > 0.0):
        raise DomainError(f"tail_epsilon must be positive, got {tail_epsilon}")
    if tail_epsilon > params.q_sum:
        raise DomainError("tail_epsilon exceeds q + 1/q; the radius would fall below 1")
    radius = 1.0 + math.log(params.q_sum / tail_epsilon) / params.rate
    return TruncationWindow(radius)


def _panel_edges(a, b, width, breakpoints):
    count = max(1, int(math.ceil((b - a) / width - 1e-12)))
    edges = np.linspace(a, b, count + 1)
    if breakpoints is not None:
        extra = np.asarray(breakpoints, dtype=float).ravel()
        extra = extra[(extra > a) & (extra < b)]
        if extra.size:
            edges = np.unique(np.concatenate([edges, extra]))
            # Sliver panels next to breakpoints carry no information.
            keep = np.concatenate([[True], np.diff(edges) > 1e-13 * max(1.0, b - a)])
            edges = edges[keep]
            edges[-1] = b
    return edges


def _rule(edges, level):
    x, w = _gauss_legendre(GAUSS_NODES)
    t = np.linspace(0.0, 1.0, 2**level + 1)
    sub = edges[:-1, None] + np.diff(edges)[:, None] * t
    left = sub[:, :-1].ravel()
    right = sub[:, 1:].ravel()
    mid = 0.5 * (left + right)
    half = 0.5 * (right - left)
    nodes = (mid[:, None] + half[:, None] * x).ravel()
    weights = (half[:, None] * w).ravel()
    return nodes, weights


def _evaluate(integrand, nodes):
    values = np.asarray(integrand(nodes), dtype=float)
    if values.ndim == 0 or values.shape[-1] != nodes.size:
        values = np.broadcast_to(values, np.broadcast_shapes(values.shape, nodes.shape))
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        location = float(nodes[bad[-1]])
        raise IntegrandError(f"non-finite integrand value at h = {location!r}", location)
    return values


def _refine(kernel, integrand, edges, config):
    """Run the level-doubling loop on fixed panel ``edges``.

    Returns ``(value, change, level)``; ``change`` is the last absolute
    difference between consecutive levels.
    """
    previous = None
    level = 0
    while True:
        nodes, weights = _rule(edges, level)
        kw = kernel.psi(nodes) * weights
        values = _evaluate(integrand, nodes)
        # Fixed-order reduction over the node axis keeps results bit-stable.
        current = np.sum(values * kw, axis=-1)
        scale = np.sum(np.abs(values) * kw, axis=-1)
        if previous is not None:
            change = np.abs(current - previous)
            if np.all(change <= config.rel_tol * np.maximum(np.maximum(np.abs(current), scale), 1e-300)):
                return current, change, level
            if level >= config.max_refinements or 2 * nodes.size > MAX_NODES:
                raise ToleranceNotMetError(
                    f"relative change {float(np.max(change / np.maximum(scale, 1e-300))):.3g} "
                    f"above rel_tol={config.rel_tol:g} after {level} refinements",
                    best=_scalar(current),
                    error=_scalar(change),
                )
        previous = current
        level += 1


def _scalar(a):
    return float(a) if np.ndim(a) == 0 else a


def integrate_weighted(kernel: DensityKernel, integrand, config: QuadratureConfig = None, breakpoints=None) -> QuadResult:
    """Integrate ``integrand(h) * psi(h)`` over the real line.

    Parameters
    ----------
    kernel : DensityKernel
    integrand : callable
        Vectorized ``g``; see the module docstring for the shape contract.
    config : QuadratureConfig, optional
    breakpoints : array_like, optional
        Abscissae where ``g`` is not smooth. They become extra panel edges so
        that each panel sees a smooth integrand.

    Returns
    -------
    QuadResult
        ``error`` is the last refinement change plus ``tail_epsilon`` times
        the size of ``g`` at the window edges.

    Raises
    ------
    ToleranceNotMetError
        Refinement did not converge; the exception carries the best estimate.
    IntegrandError
        ``g`` returned a non-finite value.
    """
    config = config or QuadratureConfig()
    radius = truncation_radius(kernel.params, config.tail_epsilon).radius
    edges = _panel_edges(-radius, radius, config.panel_width, breakpoints)
    value, change, level = _refine(kernel, integrand, edges, config)
    rim = np.abs(_evaluate(integrand, np.array([-radius, radius])))
    error = change + config.tail_epsilon * np.max(rim, axis=-1)
    return QuadResult(_scalar(value), _scalar(error), level, radius)


def integrate_interval(kernel: DensityKernel, integrand, a: float, b: float, config: QuadratureConfig = None) -> QuadResult:
    """Integrate ``integrand * psi`` over the finite interval ``[a, b]`` (no tail term)."""
    config = config or QuadratureConfig()
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise DomainError(f"invalid interval [{a}, {b}]")
    edges = _panel_edges(a, b, config.panel_width, None)
    value, change, level = _refine(kernel, integrand, edges, config)
    return QuadResult(_scalar(value), _scalar(change), level, max(abs(a), abs(b)))


def _one(h):
    return np.ones_like(h)


def tail_mass(kernel: DensityKernel, threshold: float, config: QuadratureConfig = None) -> float:
    """Numeric mass of ``psi`` on ``|h| >= threshold``.

    The right tail is integrated on ``[t, t + R - 1]``; what lies beyond is at
    most ``tail_epsilon * B^(-beta (t - 1))``, i.e. relatively negligible.
    """
    if not (threshold >= 1.0 and math.isfinite(threshold)):
        raise DomainError(f"threshold must be a finite real >= 1, got {threshold}")
    config = config or QuadratureConfig()
    radius = truncation_radius(kernel.params, config.tail_epsilon).radius
    half = integrate_interval(kernel, _one, threshold, threshold + radius - 1.0, config)
    return 2.0 * half.value
