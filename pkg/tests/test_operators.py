import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from psi_operators import (
    DIRECT,
    KANTOROVICH,
    KINDS,
    QUADRATURE,
    ActivationParams,
    BoundQuery,
    BudgetExceededError,
    DensityKernel,
    IterationPlan,
    OperatorSpec,
    QuadratureConfig,
    SpecificationError,
    TargetFunction,
    apply,
    apply_direct,
    apply_iterated,
    apply_kantorovich,
    apply_quadrature_op,
    bound_T,
    centered_moment,
    derivative_commutation_check,
    make_target,
    truncation_radius,
)

from conftest import params_strategy, psi_cdf

WEIGHTS = (0.1, 0.2, 0.3, 0.4)
XS = np.linspace(-3, 3, 7)


def spec_for(kind, n, weights=WEIGHTS):
    return OperatorSpec(kind, n, weights if kind == QUADRATURE else None)


def quad_oracle(f, kind, n, x, params, weights=WEIGHTS, points=None):
    """scipy.quad over u with the u-space kernel of each kind."""
    k = DensityKernel(params)
    if kind == DIRECT:
        K = lambda u: float(k.psi(u))
    elif kind == KANTOROVICH:
        K = lambda u: psi_cdf(params, u + 1.0) - psi_cdf(params, u)
    else:
        K = lambda u: sum(w * float(k.psi(u + (s + 1) / len(weights))) for s, w in enumerate(weights))
    r = truncation_radius(params, 1e-14).radius + 1.0
    pts = sorted(p for p in (points or []) if -r < p < r)
    edges = [-r] + pts + [r]
    return sum(
        integrate.quad(lambda u: float(f(x - u / n)) * K(u), a, b, limit=500, epsabs=1e-14, epsrel=1e-12)[0]
        for a, b in zip(edges, edges[1:])
    )


class TestSpecs:
    def test_unknown_kind(self):
        with pytest.raises(SpecificationError):
            OperatorSpec("bernstein", 4)

    @pytest.mark.parametrize("n", [0, -3, 2.5])
    def test_bad_scale(self, n):
        with pytest.raises(SpecificationError):
            OperatorSpec(DIRECT, n)

    @pytest.mark.parametrize("w", [(0.5, 0.6), (), (1.2, -0.2), None])
    def test_bad_weights(self, w):
        with pytest.raises(SpecificationError):
            OperatorSpec(QUADRATURE, 4, w)

    def test_weights_on_wrong_kind(self):
        with pytest.raises(SpecificationError):
            OperatorSpec(DIRECT, 4, (1.0,))

    def test_monotone_plan(self):
        with pytest.raises(SpecificationError):
            IterationPlan((spec_for(DIRECT, 16), spec_for(DIRECT, 9)), monotone=True)
        with pytest.raises(SpecificationError):
            IterationPlan(())
        assert IterationPlan.power(spec_for(DIRECT, 9), 3).depth == 3

    def test_target_metadata(self):
        with pytest.raises(SpecificationError):
            TargetFunction(np.sin, 1.0, derivatives=(np.cos,))
        with pytest.raises(SpecificationError):
            make_target("sin").target.derivative(9)
        cos = make_target("sin").target.derivative(1)
        assert cos(0.0) == 1.0 and cos.order == 3


@pytest.mark.parametrize("kind", KINDS)
def test_constants_reproduced(kernel, kind):
    f = make_target("const").target
    for n in (1, 16, 256):
        np.testing.assert_allclose(apply(f, spec_for(kind, n), XS, kernel), f(XS), atol=1e-8)


def test_identity(kernel):
    f = make_target("id").target
    for n in (4, 16, 100):
        np.testing.assert_allclose(apply_direct(f, n, XS, kernel), XS, atol=1e-8)
        np.testing.assert_allclose(apply_kantorovich(f, n, XS, kernel), XS + 1 / (2 * n), atol=1e-8)
        shift = sum(w * (s + 1) / (len(WEIGHTS) * n) for s, w in enumerate(WEIGHTS))
        np.testing.assert_allclose(apply_quadrature_op(f, spec_for(QUADRATURE, n), XS, kernel), XS + shift, atol=1e-8)


def test_sin_within_jackson_bound(unit_kernel):
    f = make_target("sin").target
    value = apply_direct(f, 32, 0.3, unit_kernel)
    bound = bound_T(f, BoundQuery(0.5, 32), unit_kernel.params)
    assert isinstance(value, float)
    assert abs(value - math.sin(0.3)) <= bound


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("label", ["lorentz", "gauss", "sin"])
def test_smooth_against_quad(kind, label):
    p = ActivationParams(2.0, 0.5, 2.0)
    f = make_target(label).target
    for x in (-1.3, 0.0, 2.2):
        got = apply(f, spec_for(kind, 8), x, DensityKernel(p))
        assert got == pytest.approx(quad_oracle(f, kind, 8, x, p), abs=1e-10)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("label", ["ramp", "abs_sin"])
def test_kinked_against_quad(kind, label):
    p = ActivationParams(0.5, 1.0, math.e)
    entry = make_target(label)
    f = entry.target
    n = 16
    for x in (-1.0, 0.02, math.pi):
        kinks = f.breakpoints(x - 10, x + 10)
        # kinks of f(x - u/n) in u, including the unit-window shifts
        pts = [n * (x - b) + s for b in kinks for s in (-1.0, 0.0, 1.0)]
        got = apply(f, spec_for(kind, n), x, DensityKernel(p), with_error=True)
        want = quad_oracle(f, kind, n, x, p, points=pts)
        assert abs(got.value - want) <= max(got.error, 1e-12) + 1e-10


@given(params_strategy, st.sampled_from(KINDS), st.integers(1, 64), st.floats(-5, 5), st.floats(-3, 3))
def test_translation_covariance(p, kind, n, x, shift):
    k = DensityKernel(p)
    f = make_target("gauss").target
    g = TargetFunction(lambda y: np.exp(-((y + shift) ** 2)), 1.0)
    assert apply(g, spec_for(kind, n), x, k) == pytest.approx(apply(f, spec_for(kind, n), x + shift, k), abs=1e-11)


@given(params_strategy, st.sampled_from(KINDS), st.integers(1, 64))
def test_sup_norm_non_expansive(p, kind, n):
    f = make_target("sin").target
    out = apply(f, spec_for(kind, n), np.linspace(-4, 4, 41), DensityKernel(p))
    assert np.max(np.abs(out)) <= 1 + 1e-10


def test_positivity_and_linearity(kernel):
    f, g = make_target("gauss").target, make_target("cos").target
    h = TargetFunction(lambda y: 2 * f(y) - 3 * g(y), 5.0)
    for kind in KINDS:
        s = spec_for(kind, 12)
        lhs = apply(h, s, XS, kernel)
        np.testing.assert_allclose(lhs, 2 * apply(f, s, XS, kernel) - 3 * apply(g, s, XS, kernel), atol=1e-12)
        assert np.all(apply(f, s, XS, kernel) > 0)


def test_repeat_calls_are_bit_identical(kernel):
    f = make_target("lorentz").target
    s = spec_for(KANTOROVICH, 16)
    a = apply(f, s, XS, kernel)
    b = apply(f, s, XS, kernel)
    assert np.array_equal(a, b)


class TestCenteredMoments:
    @pytest.mark.parametrize("k", [1, 3, 5])
    def test_odd_direct_vanish(self, kernel, k):
        assert abs(centered_moment(spec_for(DIRECT, 10), 0.7, k, kernel)) <= 1e-9

    def test_second_direct_spot(self, unit_kernel):
        value = centered_moment(spec_for(DIRECT, 10), 0.0, 2, unit_kernel)
        assert 0 < value <= 0.11027

    def test_kantorovich_first(self, kernel):
        assert centered_moment(spec_for(KANTOROVICH, 20), 1.0, 1, kernel) == pytest.approx(1 / 40, abs=1e-12)

    @given(params_strategy, st.sampled_from(KINDS), st.integers(1, 4), st.floats(-10, 10))
    def test_translation_invariant(self, p, kind, k, x):
        kern = DensityKernel(p)
        s = spec_for(kind, 16)
        assert centered_moment(s, x, k, kern) == pytest.approx(centered_moment(s, 0.0, k, kern), abs=1e-12)

    def test_rejects_order(self, kernel):
        with pytest.raises(SpecificationError):
            centered_moment(spec_for(DIRECT, 4), 0.0, 0, kernel)


class TestCommutation:
    def test_first_derivative_direct(self, unit_kernel):
        chk = derivative_commutation_check(make_target("sin").target, spec_for(DIRECT, 16), 0.5, 1, unit_kernel)
        assert chk.residual <= 1e-4
        assert chk.rhs == pytest.approx(apply_direct(make_target("cos").target, 16, 0.5, unit_kernel), abs=1e-14)

    def test_second_derivative_kantorovich(self, unit_kernel):
        chk = derivative_commutation_check(make_target("sin").target, spec_for(KANTOROVICH, 16), 0.2, 2, unit_kernel)
        minus_sin = TargetFunction(lambda y: -np.sin(y), 1.0)
        assert chk.rhs == pytest.approx(apply_kantorovich(minus_sin, 16, 0.2, unit_kernel), abs=1e-14)
        assert chk.residual <= 1e-3
        assert chk.residual <= chk.tolerance

    def test_missing_derivative(self, unit_kernel):
        with pytest.raises(SpecificationError):
            derivative_commutation_check(make_target("lorentz").target, spec_for(DIRECT, 16), 0.0, 3, unit_kernel)


def _sin_matrix(spec, kernel, cfg):
    # Op sin = a sin + b cos and Op cos = -b sin + a cos for every kind
    sin = make_target("sin").target
    a = apply(sin, spec, math.pi / 2, kernel, cfg)
    b = apply(sin, spec, 0.0, kernel, cfg)
    return np.array([[a, -b], [b, a]])


class TestIterated:
    def test_single_stage_identical(self, kernel):
        f = make_target("gauss").target
        s = spec_for(QUADRATURE, 16)
        np.testing.assert_allclose(apply_iterated(f, IterationPlan((s,)), XS, kernel), apply(f, s, XS, kernel), atol=1e-12, rtol=0)

    @pytest.mark.parametrize("kind", KINDS)
    def test_constants(self, kernel, kind):
        f = make_target("const").target
        out = apply_iterated(f, IterationPlan.power(spec_for(kind, 9), 3), XS, kernel, with_error=True)
        assert np.all(np.abs(out.value - 1.0) <= out.error + 1e-12)

    @pytest.mark.parametrize("kind", KINDS)
    @pytest.mark.parametrize("chain", [(16, 16), (9, 16, 25)])
    def test_against_matrix_oracle(self, kernel, kind, chain):
        cfg = QuadratureConfig()
        specs = tuple(spec_for(kind, n) for n in chain)
        m = np.eye(2)
        for s in specs:
            m = _sin_matrix(s, kernel, cfg) @ m
        exact = m[0, 0] * np.sin(XS) + m[1, 0] * np.cos(XS)
        got = apply_iterated(make_target("sin").target, IterationPlan(specs), XS, kernel, cfg, with_error=True)
        np.testing.assert_allclose(got.value, exact, atol=1e-11, rtol=0)
        assert np.all(got.error < 1e-9)

    def test_mixed_kinds(self, kernel):
        cfg = QuadratureConfig()
        specs = (spec_for(KANTOROVICH, 9), spec_for(QUADRATURE, 16), spec_for(DIRECT, 25))
        m = np.eye(2)
        for s in specs:
            m = _sin_matrix(s, kernel, cfg) @ m
        got = apply_iterated(make_target("sin").target, IterationPlan(specs), XS, kernel, cfg)
        np.testing.assert_allclose(got, m[0, 0] * np.sin(XS) + m[1, 0] * np.cos(XS), atol=1e-11)

    def test_two_stage_domination(self, unit_kernel):
        f = make_target("sin").target
        s = spec_for(DIRECT, 16)
        single = np.max(np.abs(apply(f, s, XS, unit_kernel) - f(XS)))
        double = np.max(np.abs(apply_iterated(f, IterationPlan.power(s, 2), XS, unit_kernel) - f(XS)))
        assert double <= 2 * single + 1e-10

    def test_lazy_path_agrees(self):
        # breakpoints force the lazy nested-Gauss path
        kern = DensityKernel(ActivationParams(2.0, 2.0, math.e))
        cfg = QuadratureConfig(tail_epsilon=1e-8, panel_width=2.0)
        smooth = make_target("gauss").target
        flagged = TargetFunction(smooth.func, 1.0, breakpoints=lambda a, b: np.empty(0))
        plan = IterationPlan.power(spec_for(DIRECT, 16), 2)
        xs = np.array([-0.5, 0.0, 1.0])
        lazy = apply_iterated(flagged, plan, xs, kern, cfg, with_error=True)
        lattice = apply_iterated(smooth, plan, xs, kern, cfg, with_error=True)
        assert np.all(np.abs(lazy.value - lattice.value) <= lazy.error + lattice.error)

    def test_budget(self, unit_kernel):
        f = make_target("ramp").target
        with pytest.raises(BudgetExceededError):
            apply_iterated(f, IterationPlan.power(spec_for(KANTOROVICH, 16), 3), XS, unit_kernel, budget=1000)
