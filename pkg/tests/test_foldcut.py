import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hessosc import CutoffSpec
from hessosc.foldcut import (
    CurveError,
    CutoffFunction,
    ReducedIntegrand,
    curve_density,
    numeric_f1,
    numeric_f2,
    reduced_expansion0,
    reduced_f2,
    trace_curve,
)
from hessosc.oscquad import CutoffIntegrator

WINDOW = ((-0.5, 0.5), (-0.5, 0.5))

# scipy quad of sqrt(2 pi) e^{i pi/4} int e^{i s^2/(2t)} chi(s/eps) psi(s, 0) ds,
# t = 1e-2, eps = 1e-1, default chi and psi
REDUCED_QUAD_ORACLE = complex(-0.00445876064066294, 0.01223141774480734)

# 1 / (108 sqrt(2) r^{3/2}) with r = sqrt(s)/6, at s = 1/4 and s = 1
CUBIC_DENSITY = {0.25: 0.2721655269759087, 1.0: 0.09622504486493763}


@pytest.fixture(scope="module")
def cubic_curve(cubic):
    return trace_curve(cubic, (0, 0), cubic.hessian_det(), WINDOW, (0.2, 1.2))


@pytest.fixture(scope="module")
def cubic_branch(cubic_curve):
    # gamma(s) = +-(r, r); keep the branch in the first quadrant
    (b,) = [b for b in cubic_curve.branches if b.gamma[0, 0] > 0]
    return b


def test_cubic_curve_is_diagonal(cubic_branch):
    s = cubic_branch.s
    r = np.sqrt(s) / 6
    assert np.allclose(cubic_branch.gamma, np.column_stack([r, r]), atol=1e-12)
    assert np.allclose(cubic_branch.f, s**1.5 / 108, rtol=1e-12)
    u_res, g_res = cubic_branch.residuals()
    assert u_res <= 1e-10 and g_res <= 1e-10


@pytest.mark.parametrize("s", [0.25, 1.0])
def test_cubic_density_and_f2(cubic_branch, s):
    q = cubic_branch.evaluate(s)
    assert q["density"][0] == pytest.approx(CUBIC_DENSITY[s], rel=1e-8)
    exact = 1 / (144 * math.sqrt(s))
    assert reduced_f2(cubic_branch, s)[0] == pytest.approx(exact, rel=1e-10)
    assert numeric_f2(cubic_branch, s)[0] == pytest.approx(exact, rel=1e-6)


def test_linear_cutoff_for_quadratic(quad, xs):
    curve = trace_curve(quad, (0, 0), xs[0], ((-1, 1), (-1, 1)), (-0.5, 0.5))
    (b,) = curve.branches
    assert np.allclose(b.gamma[:, 0], b.s, atol=1e-13) and np.allclose(b.gamma[:, 1], 0, atol=1e-13)
    assert np.allclose(curve_density(b), 1.0, rtol=1e-13)
    assert np.allclose(b.f, b.s**2 / 2, atol=1e-14)
    assert np.allclose(reduced_f2(b, [-0.3, 0.1, 0.4]), 1.0, rtol=1e-12)


def test_curve_through_shifted_critical_point(cubic):
    a = 0.1
    xi = (-3 * a * a, -3 * a * a)
    curve = trace_curve(cubic, xi, cubic.hessian_det(), WINDOW, (0.2, 0.5))
    s0 = 36 * a * a
    hits = [b.point(s0)[0] for b in curve.branches if b.s[0] <= s0 <= b.s[-1]]
    assert any(np.allclose(p, (a, a), atol=1e-10) for p in hits)


def test_density_scales_with_cutoff(cubic):
    u = cubic.hessian_det()
    c = 4
    base = trace_curve(cubic, (0, 0), u, WINDOW, (0.2, 1.2), n_samples=33).branches[0]
    scaled = trace_curve(cubic, (0, 0), u / c, WINDOW, (0.2 / c, 1.2 / c), n_samples=33).branches[0]
    assert np.allclose(scaled.gamma, base.gamma, atol=1e-12)
    assert np.allclose(scaled.density, c * base.density, rtol=1e-10)


def test_secondd_identity(cubic_branch):
    s = np.linspace(0.3, 1.1, 9)
    q = cubic_branch.evaluate(s)
    Gd, M = q["gamma_dot"], q["M"]
    along = np.einsum("ki,kij,kj->k", Gd, M, Gd)
    f2 = reduced_f2(cubic_branch, s)
    assert np.all(np.abs(f2 - along) <= 1e-6 * np.maximum(1, np.abs(f2)))


def test_second_difference_on_grid(cubic_branch):
    s = np.linspace(0.3, 1.1, 9)
    f2 = reduced_f2(cubic_branch, s)
    fd = numeric_f2(cubic_branch, s)
    assert np.all(np.abs(f2 - fd) <= 1e-6 * np.maximum(1, np.abs(f2)))


def test_f1_matches_sampled_derivative(cubic_branch):
    s = np.linspace(0.3, 1.1, 9)
    f1 = cubic_branch.evaluate(s)["f1"]
    assert np.allclose(f1, np.sqrt(s) / 72, rtol=1e-12)
    assert np.allclose(numeric_f1(cubic_branch, s), f1, rtol=1e-6)


def test_density_positive(cubic_curve):
    assert all(np.all(d > 0) for d in curve_density(cubic_curve))


def test_rows_layout(cubic_curve):
    rows = cubic_curve.rows()
    assert len(rows) == sum(len(b.s) for b in cubic_curve.branches)
    assert len(rows[0]) == 7


def test_cutoff_with_critical_point_rejected(quad):
    with pytest.raises(CurveError):
        CutoffFunction(quad).check(WINDOW)


def test_reduced_integrand_norms(cubic_branch):
    w = ReducedIntegrand(cubic_branch, lambda s: np.ones_like(s), lambda X: np.ones(len(X)))
    w.compute_norms()
    # int dphi = int_{0.2}^{1.2} ds / (108 sqrt 2 r^{3/2}) with r = sqrt(s)/6
    c = 6**1.5 / (108 * math.sqrt(2))
    exact = c * 4 * (1.2**0.25 - 0.2**0.25)
    assert w.l1 == pytest.approx(exact, rel=1e-6)
    assert w.sup == pytest.approx(c * 0.2**-0.75, rel=1e-10)


def test_reduced_term_quadratic_oracle(quad, xs):
    val = reduced_expansion0(quad, (0, 0), xs[0], CutoffSpec(), 0.1, t=1e-2)
    assert abs(val.value - REDUCED_QUAD_ORACLE) <= 1e-6 * abs(REDUCED_QUAD_ORACLE)


def test_reduced_term_empty_cutoff(quad, xs):
    val = reduced_expansion0(quad, (0, 0), xs[0], CutoffSpec(), 1.0, t=1e-2)
    assert val.value == 0


def test_reduced_term_error_is_order_t_for_linear_cutoff(quad, xs):
    ts = np.array([1e-3, 1e-2, 1e-1])
    diffs = []
    for t in ts:
        full = CutoffIntegrator(quad, 1 / t, 0.1, None, CutoffSpec(), cutoff=xs[0],
                                lambda_cap=math.inf).integrate(tol=1e-10).value
        red = reduced_expansion0(quad, (0, 0), xs[0], CutoffSpec(), 0.1, t=t).value
        diffs.append(abs(full / math.sqrt(t) - red))
    assert np.polyfit(np.log(ts), np.log(diffs), 1)[0] >= 0.9


@settings(max_examples=8)
@given(st.floats(0.05, 0.15), st.floats(-0.15, -0.05))
def test_traced_points_satisfy_constraints(a, b):
    from hessosc import PolyPhase

    x1, x2 = PolyPhase.variables(2)
    P = x1**3 + x2**3
    xi = (-3 * a * a, -3 * b * b)
    s_lo, s_hi = sorted((36 * a * b * 1.5, 36 * a * b * 0.5))
    curve = trace_curve(P, xi, P.hessian_det(), WINDOW, (s_lo, s_hi), n_samples=33)
    for br in curve.branches:
        u_res, g_res = br.residuals()
        assert u_res <= 1e-10 and g_res <= 1e-10
