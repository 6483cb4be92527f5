from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hessosc import PolyPhase
from hessosc.newton import (
    analyze,
    build_polygon,
    diagonal_class,
    diagonal_point,
    edge_data,
    whitney_check,
)

from .strategies import polys

phases2 = polys(max_degree=6, min_degree=2)


def _dominates_segment(k, a, b):
    """Is there theta in [0, 1] with k >= theta a + (1 - theta) b componentwise?"""
    lo, hi = Fraction(0), Fraction(1)
    for i in range(2):
        # theta (a_i - b_i) <= k_i - b_i
        d, r = Fraction(a[i] - b[i]), Fraction(k[i] - b[i])
        if d > 0:
            hi = min(hi, r / d)
        elif d < 0:
            lo = max(lo, r / d)
        elif r < 0:
            return False
    return lo <= hi


def _brute_contains(support, k):
    return any(_dominates_segment(k, a, b) for a in support for b in support)


def test_cusp_polygon(cusp):
    poly = build_polygon(cusp)
    assert set(poly.support) == {(0, 2), (2, 1), (4, 0)}
    assert list(poly.vertices) == [(0, 2), (4, 0)]
    (e,) = edge_data(cusp, poly)
    assert e.edge_poly == cusp
    assert e.on_line((2, 1))
    assert e.slope_param == Fraction(1, 2)
    assert e.newton_distance == Fraction(4, 3)
    assert e.meets_axis1 and e.meets_axis2
    assert diagonal_class(poly) == 0
    assert diagonal_point(poly) == (Fraction(4, 3), Fraction(4, 3))


def test_cubic_polygon(cubic):
    poly = build_polygon(cubic)
    assert list(poly.vertices) == [(0, 3), (3, 0)]
    (e,) = edge_data(cubic, poly)
    assert e.edge_poly == cubic
    assert e.slope_param == 1 and e.newton_distance == Fraction(3, 2)
    assert e.meets_axis1 and e.meets_axis2
    assert diagonal_class(poly) == 0
    assert diagonal_point(poly) == (Fraction(3, 2), Fraction(3, 2))


def test_single_vertex_polygon(xs):
    x1, x2 = xs
    poly = build_polygon(x1**2 * x2**2)
    assert list(poly.vertices) == [(2, 2)]
    assert edge_data(x1**2 * x2**2, poly) == []
    assert diagonal_class(poly) == 1


def test_quartic_with_collinear_middle_point(xs):
    x1, x2 = xs
    P = x1**4 + x1**2 * x2**2 + x2**4
    poly = build_polygon(P)
    # (2, 2) lies on the segment (4,0)-(0,4), so it is not a vertex
    assert list(poly.vertices) == [(0, 4), (4, 0)]
    (e,) = edge_data(P, poly)
    assert e.edge_poly == P
    assert e.slope_param == 1 and e.newton_distance == 2
    assert diagonal_class(poly) == 0


def test_linear_terms_rejected(xs):
    x1, x2 = xs
    with pytest.raises(ValueError):
        build_polygon(x1 + x2**2)
    with pytest.raises(ValueError):
        build_polygon(1 + x1**2)


def test_newton_distance_is_diagonal_intersection(cusp):
    (e,) = edge_data(cusp, build_polygon(cusp))
    d = e.newton_distance
    assert e.slope_param * d + d == e.line_constant


def test_cubic_fold_on_axis():
    x1, x2 = PolyPhase.variables(2)
    rep = whitney_check(x1**3 + x2**3, "axis1-away-origin", ((0.5, 2.0), (-1.0, 1.0)), 32)
    assert rep.verdict == "fold"
    assert rep.samples_checked > 0
    assert rep.min_grad_detH > 1e-8 and rep.min_fold_injectivity > 1e-8


def test_cusp_violation_has_kernel_witness(cusp):
    rep = whitney_check(cusp, "off-axes", ((-2.0, 2.0), (-2.0, 2.0)), 32)
    assert rep.verdict == "violation"
    w = rep.witnesses[0]
    x1, x2 = w["point"]
    assert x2 == pytest.approx(-x1 * x1, abs=1e-9)
    t1, t2 = w["tangent"]
    # the tangent of x2 = -x1^2 is proportional to (1, -2 x1)
    assert t2 == pytest.approx(-2 * x1 * t1, abs=1e-9)
    assert w["injectivity_defect"] < 1e-8


def test_nondegenerate_phase_folds_vacuously(xs):
    x1, x2 = xs
    rep = whitney_check(x1 * x2)
    assert rep.verdict == "fold" and rep.samples_checked == 0


def test_whitney_rejects_unknown_region(cubic):
    with pytest.raises(ValueError):
        whitney_check(cubic, "everywhere")


def test_analyze_reports_verdicts(cusp, cubic):
    rep = analyze(cubic)
    assert rep["s"] == 0
    assert {v["verdict"] for v in rep["edges"][0]["folds"].values()} == {"fold"}
    assert set(rep["edges"][0]["folds"]) == {"off-axes", "axis1-away-origin", "axis2-away-origin"}
    rep = analyze(cusp)
    assert rep["vertices"] == [[0, 2], [4, 0]]
    assert rep["edges"][0]["folds"]["off-axes"]["verdict"] == "violation"


# -- properties ------------------------------------------------------------------


@given(phases2, st.randoms(use_true_random=False))
def test_polygon_invariant_under_term_permutation(P, rnd):
    terms = list(P.terms)
    rnd.shuffle(terms)
    assert build_polygon(PolyPhase(2, terms)) == build_polygon(P)


@given(phases2)
def test_hull_contains_support_and_vertices_are_support(P):
    poly = build_polygon(P)
    assert all(poly.contains(k) for k in P.support)
    assert set(poly.vertices) <= set(P.support)
    v = poly.vertices
    assert all(a[0] < b[0] and a[1] > b[1] for a, b in zip(v, v[1:]))


@given(phases2, st.tuples(st.integers(0, 8), st.integers(0, 8)))
def test_polygon_matches_brute_force_quadrant_hull(P, k):
    assert build_polygon(P).contains(k) == _brute_contains(P.support, k)


@given(phases2)
def test_edge_endpoints_are_vertices(P):
    poly = build_polygon(P)
    for e in edge_data(P, poly):
        assert set(e.endpoints) <= set(poly.vertices)
        assert all(e.on_line(k) for k in e.edge_poly.support)
        d = e.newton_distance
        assert e.on_line((d, d))


@given(st.integers(0, 6), st.integers(0, 6), st.fractions(-3, 3, max_denominator=5).filter(bool))
def test_monomial_polygons(a1, a2, c):
    if a1 + a2 < 2:
        return
    x1, x2 = PolyPhase.variables(2)
    poly = build_polygon(c * x1**a1 * x2**a2)
    assert list(poly.vertices) == [(a1, a2)]
    assert poly.contains((a1 + 1, a2 + 3)) and not poly.contains((a1 - 1, a2 + 5))
    assert diagonal_class(poly) == int(a1 == a2)


@given(st.integers(16, 40))
def test_cusp_violation_at_any_density(density):
    x1, x2 = PolyPhase.variables(2)
    assert whitney_check((x2 + x1**2) ** 2, "off-axes", grid_density=density).verdict == "violation"
