"""Newton polygons of two-variable phases, edge polynomials and fold checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .polyphase import PolyPhase

REGIONS = ("off-axes", "axis1-away-origin", "axis2-away-origin")


@dataclass(frozen=True)
class EdgeData:
    endpoints: tuple
    slope_param: Fraction
    edge_poly: PolyPhase
    newton_distance: Fraction
    meets_axis1: bool
    meets_axis2: bool

    @property
    def beta(self) -> float:
        return float(self.slope_param) ** 0.5

    @property
    def line_constant(self) -> Fraction:
        """``c`` in the edge line ``beta^2 k1 + k2 = c``."""
        (a1, a2), _ = self.endpoints
        return self.slope_param * a1 + a2

    def on_line(self, k) -> bool:
        return self.slope_param * k[0] + k[1] == self.line_constant

    def to_dict(self) -> dict:
        return {
            "endpoints": [list(p) for p in self.endpoints],
            "beta_squared": str(self.slope_param),
            "newton_distance": str(self.newton_distance),
            "edge_poly": self.edge_poly.to_dict(),
            "meets_axis1": self.meets_axis1,
            "meets_axis2": self.meets_axis2,
        }


@dataclass(frozen=True)
class NewtonPolygon:
    support: tuple
    vertices: tuple
    compact_edges: tuple = field(default=())

    def contains(self, k) -> bool:
        """Whether the lattice/rational point ``k`` lies in the polygon."""
        k1, k2 = Fraction(k[0]), Fraction(k[1])
        v = self.vertices
        if k1 < v[0][0] or k2 < v[-1][1]:
            return False
        for (a1, a2), (b1, b2) in zip(v, v[1:]):
            # the point must lie on or above each edge line
            if (b1 - a1) * (k2 - a2) - (b2 - a2) * (k1 - a1) < 0:
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "vertices": [list(p) for p in self.vertices],
            "support": [list(p) for p in self.support],
        }


def _minimal_points(points):
    """Staircase of points not dominated componentwise by another support point."""
    pts = sorted(set(points))
    out = []
    best2 = None
    for k1, k2 in pts:
        if best2 is None or k2 < best2:
            out.append((k1, k2))
            best2 = k2
    return out


def _lower_hull(stair):
    """Monotone-chain lower convex hull; drops collinear points."""
    hull = []
    for p in stair:
        while len(hull) >= 2:
            (o1, o2), (a1, a2) = hull[-2], hull[-1]
            cross = (a1 - o1) * (p[1] - o2) - (a2 - o2) * (p[0] - o1)
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def build_polygon(P: PolyPhase) -> NewtonPolygon:
    """Newton polygon of ``P`` at the origin.

    >>> x1, x2 = PolyPhase.variables(2)
    >>> build_polygon((x2 + x1**2) ** 2).vertices
    ((0, 2), (4, 0))
    """
    if P.dimension != 2:
        raise ValueError("Newton polygons are built for two-variable phases only")
    if P.is_zero():
        raise ValueError("zero phase has an empty Newton polygon")
    low = [e for e in P.support if sum(e) <= 1]
    if low:
        raise ValueError(f"phase must vanish to second order at the origin; found terms {low}")
    support = tuple(sorted(P.support))
    vertices = tuple(_lower_hull(_minimal_points(support)))
    edges = tuple(zip(vertices, vertices[1:]))
    return NewtonPolygon(support=support, vertices=vertices, compact_edges=edges)


def diagonal_class(poly: NewtonPolygon) -> int:
    """1 when the polygon boundary meets the diagonal at a vertex, else 0."""
    if not poly.vertices:
        raise ValueError("empty polygon")
    return int(any(k1 == k2 for k1, k2 in poly.vertices))


def diagonal_point(poly: NewtonPolygon) -> tuple:
    """Point ``(d, d)`` where the boundary meets the bisectrix."""
    v = poly.vertices
    for k in v:
        if k[0] == k[1]:
            return (Fraction(k[0]), Fraction(k[1]))
    if v[0][0] > v[0][1]:
        # vertical ray x = v0[0] above the first vertex
        return (Fraction(v[0][0]), Fraction(v[0][0]))
    if v[-1][1] > v[-1][0]:
        return (Fraction(v[-1][1]), Fraction(v[-1][1]))
    for (a1, a2), (b1, b2) in zip(v, v[1:]):
        if a1 <= a2 and b1 >= b2:
            beta2 = Fraction(a2 - b2, b1 - a1)
            d = (beta2 * a1 + a2) / (1 + beta2)
            return (d, d)
    raise AssertionError("diagonal not met")  # pragma: no cover


def edge_data(P: PolyPhase, poly: NewtonPolygon) -> list:
    out = []
    for (a1, a2), (b1, b2) in poly.compact_edges:
        beta2 = Fraction(a2 - b2, b1 - a1)
        c = beta2 * a1 + a2
        phi_e = P.restrict(lambda e, beta2=beta2, c=c: beta2 * e[0] + e[1] == c)
        out.append(
            EdgeData(
                endpoints=((a1, a2), (b1, b2)),
                slope_param=beta2,
                edge_poly=phi_e,
                newton_distance=c / (1 + beta2),
                meets_axis1=(b2 == 0),
                meets_axis2=(a1 == 0),
            )
        )
    return out


# -- Whitney fold sampling ----------------------------------------------------


@dataclass
class FoldReport:
    samples_checked: int
    min_grad_detH: float
    min_fold_injectivity: float
    verdict: str
    witnesses: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "samples_checked": self.samples_checked,
            "min_grad_detH": self.min_grad_detH,
            "min_fold_injectivity": self.min_fold_injectivity,
            "verdict": self.verdict,
            "witnesses": self.witnesses,
        }


def _in_region(z, region, margin):
    x1, x2 = z
    if region == "off-axes":
        return abs(x1) >= margin and abs(x2) >= margin
    if region == "axis1-away-origin":
        return abs(x1) >= margin
    if region == "axis2-away-origin":
        return abs(x2) >= margin
    raise ValueError(f"unknown region {region!r}; expected one of {REGIONS}")


def _magnitude(P: PolyPhase, z):
    """``sum |c| |z^k|`` -- the natural scale of ``P`` at ``z``."""
    az = np.abs(np.asarray(z, dtype=float))
    return sum(abs(float(c)) * float(np.prod(az ** np.asarray(e))) for e, c in P.terms)


def _line_zeros(f, a, b, n):
    """Zeros of the scalar function ``f`` on ``[a, b]`` from ``n`` samples.

    Sign changes are refined with Brent's method; near-touching minima of
    ``|f|`` without a sign change are returned as well (possible even-order
    zeros, which are fold violations themselves).
    """
    ts = np.linspace(a, b, n)
    vals = f(ts)
    zeros = []
    scale = np.max(np.abs(vals)) if np.any(vals) else 1.0
    for i in range(n - 1):
        v0, v1 = vals[i], vals[i + 1]
        if v0 == 0:
            zeros.append(ts[i])
        elif v0 * v1 < 0:
            zeros.append(brentq(f, ts[i], ts[i + 1], xtol=1e-14, rtol=1e-14))
    if vals[-1] == 0:
        zeros.append(ts[-1])
    absv = np.abs(vals)
    for i in range(1, n - 1):
        if absv[i] <= absv[i - 1] and absv[i] <= absv[i + 1] and vals[i - 1] * vals[i + 1] > 0:
            if absv[i] <= 1e-10 * scale:
                zeros.append(ts[i])
    return zeros


def whitney_check(
    phi_e: PolyPhase,
    region: str = "off-axes",
    box=((-2.0, 2.0), (-2.0, 2.0)),
    grid_density: int = 32,
    margin: float = 0.125,
    tau1: float = 1e-8,
    tau2: float = 1e-8,
    max_witnesses: int = 8,
) -> FoldReport:
    """Sample the fold hypothesis for ``x -> grad phi_e(x)`` inside ``region``.

    The zero set of ``u = det Hess phi_e`` is found by root finding along the
    horizontal and vertical grid lines of ``box`` (``grid_density`` lines per
    unit length).  At each zero ``z`` two scaled defects are measured:
    ``|grad u(z)|`` (first-order vanishing) and ``|Hess phi_e(z) T|`` with
    ``T`` the unit tangent of ``{u = 0}`` (injectivity along the fold).
    """
    if phi_e.dimension != 2:
        raise ValueError("fold checks are two-dimensional")
    if region not in REGIONS:
        raise ValueError(f"unknown region {region!r}; expected one of {REGIONS}")
    u = phi_e.hessian_det()
    (x_lo, x_hi), (y_lo, y_hi) = box
    if u.is_constant():
        verdict = "fold" if not u.is_zero() else "violation"
        wit = [] if not u.is_zero() else [{"point": [0.0, 0.0], "reason": "det Hess vanishes identically"}]
        return FoldReport(0, float("inf") if verdict == "fold" else 0.0,
                          float("inf") if verdict == "fold" else 0.0, verdict, wit)

    gu = u.gradient()
    H = phi_e.hessian()
    n_lines_x = max(2, int(round((x_hi - x_lo) * grid_density)) + 1)
    n_lines_y = max(2, int(round((y_hi - y_lo) * grid_density)) + 1)
    n_samp = 8 * max(n_lines_x, n_lines_y) + 1

    found = []
    for y in np.linspace(y_lo, y_hi, n_lines_y):
        f = lambda t, y=y: u(np.stack(np.broadcast_arrays(t, y), axis=-1))
        found += [(x, y) for x in _line_zeros(f, x_lo, x_hi, n_samp)]
    for x in np.linspace(x_lo, x_hi, n_lines_x):
        f = lambda t, x=x: u(np.stack(np.broadcast_arrays(x, t), axis=-1))
        found += [(x, y) for y in _line_zeros(f, y_lo, y_hi, n_samp)]
    found = sorted(set((float(a), float(b)) for a, b in found))

    if not found:
        return FoldReport(0, float("inf"), float("inf"), "inconclusive")

    pts = [z for z in found if _in_region(z, region, margin)]
    if not pts:
        # degeneracy lives only inside the excluded strips
        return FoldReport(0, float("inf"), float("inf"), "fold")

    min_g = float("inf")
    min_inj = float("inf")
    witnesses = []
    for z in pts:
        zz = np.asarray(z)
        g = np.array([gi(zz) for gi in gu], dtype=float)
        gscale = max(sum(_magnitude(gi, z) for gi in gu), 1e-300)
        gnorm = float(np.hypot(*g))
        d_grad = gnorm / gscale
        Hz = np.array([[h(zz) for h in row] for row in H], dtype=float)
        hscale = max(sum(_magnitude(h, z) for row in H for h in row), 1e-300)
        if gnorm > 0:
            T = np.array([-g[1], g[0]]) / gnorm
            d_inj = float(np.linalg.norm(Hz @ T)) / hscale
        else:
            d_inj = 0.0
        min_g = min(min_g, d_grad)
        min_inj = min(min_inj, d_inj)
        if (d_grad < tau1 or d_inj < tau2) and len(witnesses) < max_witnesses:
            witnesses.append(
                {
                    "point": [z[0], z[1]],
                    "grad_detH_defect": d_grad,
                    "injectivity_defect": d_inj,
                    "tangent": None if gnorm == 0 else [float(-g[1] / gnorm), float(g[0] / gnorm)],
                }
            )
    verdict = "violation" if (min_g < tau1 or min_inj < tau2) else "fold"
    return FoldReport(len(pts), min_g, min_inj, verdict, witnesses)


def analyze(P: PolyPhase, box=((-2.0, 2.0), (-2.0, 2.0)), grid_density: int = 32,
            margin: float = 0.125) -> dict:
    """Full JSON-ready report: polygon, edges, s, and fold verdicts per edge."""
    poly = build_polygon(P)
    edges = edge_data(P, poly)
    report = {
        "vertices": [list(v) for v in poly.vertices],
        "s": diagonal_class(poly),
        "diagonal_point": [str(c) for c in diagonal_point(poly)],
        "edges": [],
    }
    for e in edges:
        # an edge meeting the horizontal axis needs folds on the vertical
        # axis away from the origin, and vice versa
        regions = ["off-axes"]
        if e.meets_axis1:
            regions.append("axis2-away-origin")
        if e.meets_axis2:
            regions.append("axis1-away-origin")
        d = e.to_dict()
        d["folds"] = {
            r: whitney_check(e.edge_poly, r, box, grid_density, margin).to_dict() for r in regions
        }
        report["edges"].append(d)
    return report
