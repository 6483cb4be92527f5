"""Decay measurements for Hessian-determinant cutoff integrals.

The quantity studied is

    I(lam, eps, xi) = int exp(i lam (Phi(x) + xi.x)) chi(det Hess Phi(x) / eps) psi(x) dx

and its supremum over ``xi``.  The scan records this supremum on a
``(lam, eps)`` grid, fits power laws (with an optional ``log(1/eps)``
factor), profiles the cusp phase ``(x2 + x1^2)^2`` at ``eps = lam^{-1/2}``,
and classifies bi-dyadic boxes ``|x_i| ~ 2^{-j_i}`` by the part of the
Newton polygon that controls them.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial.legendre import leggauss
from sklearn.base import BaseEstimator, RegressorMixin

from .bumps import BumpSpec, CutoffSpec, partition_eta
from .newton import NewtonPolygon, build_polygon, edge_data
from .oscquad import Amplitude, CutoffIntegrator, IntegralValue, _cutoff_empty, osc2d
from .polyphase import PolyPhase

SCAN_BUDGET = 2 * math.pi
DOMINANCE_TOL = 0.1
COND_LIMIT = 1e10


class FitError(ValueError):
    """Records do not support a well-posed fit."""


# -- sup over xi ----------------------------------------------------------------

@dataclass(frozen=True)
class ScanRecord:
    lam: float
    eps: float
    xi_star: tuple
    sup_val: float
    nodes_used: int
    est_error: float
    value_at_zero: float = 0.0

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "eps": self.eps, "xi1": self.xi_star[0], "xi2": self.xi_star[1],
                "absval": self.sup_val, "est_error": self.est_error,
                "nodes_used": self.nodes_used, "value_at_zero": self.value_at_zero}


def default_xi_box(phase: PolyPhase, psi=None, margin: float = 0.5):
    """Componentwise range of ``-grad Phi`` over ``supp psi``, widened by ``margin``."""
    psi = psi if psi is not None else BumpSpec(phase.dimension)
    lo, hi = psi.support
    lo = np.atleast_1d(lo)[None, :]
    hi = np.atleast_1d(hi)[None, :]
    box = []
    for g in phase.gradient():
        gl, gh = g.interval_bound(lo, hi)
        box.append((float(-gh[0]) - margin, float(-gl[0]) + margin))
    return tuple(box)


def sup_over_xi(phase: PolyPhase, lam: float, eps: float, xi_box=None, grid: int = 17,
                refinements: int = 2, psi=None, chi: CutoffSpec | None = None,
                budget: float = SCAN_BUDGET, order: int = 12, **kw) -> ScanRecord:
    """Grid search for ``max_xi |I(lam, eps, xi)|`` over ``xi_box``.

    A ``grid x grid`` scan is followed by ``refinements`` local passes on a
    ``9 x 9`` grid spanning one coarse cell on each side of the current
    maximiser.  ``xi = 0`` is always a candidate when it lies in the box.
    ``est_error`` compares the maximiser's value with a doubled-order value.
    """
    if phase.dimension != 2:
        raise ValueError("scans are two-dimensional")
    psi = psi if psi is not None else BumpSpec(2)
    chi = chi or CutoffSpec()
    xi_box = tuple(tuple(map(float, b)) for b in (xi_box or default_xi_box(phase, psi)))
    if _cutoff_empty(phase.hessian_det(), psi, eps, chi):
        return ScanRecord(float(lam), float(eps), (0.0, 0.0), 0.0, 0, 0.0, 0.0)
    integ = CutoffIntegrator(phase, lam, eps, psi, chi, xi_box=xi_box, budget=budget,
                             order=order, **kw)
    if integ.plan.n_panels == 0:
        return ScanRecord(float(lam), float(eps), (0.0, 0.0), 0.0, 0, 0.0, 0.0)

    (a1, b1), (a2, b2) = xi_box
    g1 = np.linspace(a1, b1, grid)
    g2 = np.linspace(a2, b2, grid)
    vals = np.abs(integ.value_grid(g1, g2))
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    best = (float(vals[i, j]), (float(g1[i]), float(g2[j])))
    h1 = (b1 - a1) / (grid - 1)
    h2 = (b2 - a2) / (grid - 1)
    for _ in range(refinements):
        c1, c2 = best[1]
        r1 = np.clip(np.linspace(c1 - h1, c1 + h1, 9), a1, b1)
        r2 = np.clip(np.linspace(c2 - h2, c2 + h2, 9), a2, b2)
        vals = np.abs(integ.value_grid(r1, r2))
        i, j = np.unravel_index(np.argmax(vals), vals.shape)
        if vals[i, j] > best[0]:
            best = (float(vals[i, j]), (float(r1[i]), float(r2[j])))
        h1, h2 = h1 / 4, h2 / 4

    zero_in = a1 <= 0 <= b1 and a2 <= 0 <= b2
    v0 = float(abs(integ.values(np.zeros((1, 2)))[0])) if zero_in else 0.0
    if v0 > best[0]:
        best = (v0, (0.0, 0.0))
    xi_star = np.array(best[1])
    coarse = integ.values(xi_star[None, :])[0]
    try:
        fine = integ.values(xi_star[None, :], order=2 * order)[0]
        est = float(abs(fine - coarse))
        sup = float(abs(fine))
        nodes = integ.nodes_used(2 * order)
    except Exception:
        # the doubled order does not fit in memory; keep the base value
        est = math.nan
        sup = float(abs(coarse))
        nodes = integ.nodes_used(order)
    return ScanRecord(float(lam), float(eps), best[1], max(sup, v0), nodes, est, v0)


def scan(phase: PolyPhase, lam_grid, eps_grid, threads: int = 1, **kw) -> list:
    """``sup_over_xi`` for every ``(lam, eps)``; results in ``(lam, eps)`` order."""
    cells = [(float(l), float(e)) for l in lam_grid for e in eps_grid]
    work = lambda c: sup_over_xi(phase, c[0], c[1], **kw)
    if threads <= 1:
        return [work(c) for c in cells]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, cells))


# -- fitting --------------------------------------------------------------------

class PowerLawDecay(BaseEstimator, RegressorMixin):
    """Least-squares power law ``y = C lam^a eps^b (log 1/eps)^s``.

    ``X`` has columns ``(lam, eps)``.  With ``log_factor=False`` the exponent
    ``s`` is fixed at zero.  After ``fit``: ``coef_`` holds ``(a, b)`` or
    ``(a, b, s)``, ``stderr_`` their standard errors, ``intercept_`` is
    ``log C`` and ``rms_`` the residual RMS in log space.
    """

    def __init__(self, log_factor: bool = False):
        self.log_factor = log_factor

    def _design(self, X):
        X = np.asarray(X, float)
        lam, eps = X[:, 0], X[:, 1]
        cols = [np.ones(len(X)), np.log(lam), np.log(eps)]
        if self.log_factor:
            if np.any(eps >= 1):
                raise FitError("log(1/eps) factor needs eps < 1")
            cols.append(np.log(np.log(1 / eps)))
        return np.column_stack(cols)

    def fit(self, X, y):
        y = np.asarray(y, float)
        if np.any(y <= 0):
            raise FitError("power-law fit needs positive values")
        D = self._design(X)
        if len(y) <= D.shape[1]:
            raise FitError("not enough records for the fit")
        cond = np.linalg.cond(D)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise FitError(f"ill-conditioned design matrix (condition number {cond:.3g})")
        ly = np.log(y)
        beta, *_ = np.linalg.lstsq(D, ly, rcond=None)
        r = ly - D @ beta
        dof = len(y) - D.shape[1]
        s2 = float(r @ r) / dof
        cov = s2 * np.linalg.inv(D.T @ D)
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        self.stderr_ = np.sqrt(np.maximum(np.diag(cov)[1:], 0.0))
        self.rms_ = float(np.sqrt(np.mean(r**2)))
        self.condition_ = float(cond)
        return self

    def predict(self, X):
        D = self._design(X)
        return np.exp(D @ np.r_[self.intercept_, self.coef_])


@dataclass
class FitResult:
    rho_lambda: float
    rho_eps: float
    se_lambda: float
    se_eps: float
    log_slope: float
    log_slope_se: float
    log_tstat: float
    rms: float
    rms_log: float
    log_power: float
    compensated_ratio: float
    n_used: int
    n_dropped: int
    s_hint: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _span_ok(v, min_points=6, min_ratio=4.0):
    u = np.unique(v)
    return len(u) >= min_points and u.max() / u.min() >= min_ratio


def fit_decay(records, s_hint: int = 0, min_points: int = 6) -> FitResult:
    """Fit ``log sup`` against ``(log lam, log eps)`` and probe a ``log(1/eps)`` factor.

    Records with ``sup_val == 0`` (empty cutoff) are dropped.  The log slope
    is the least-squares slope of ``sup * lam * eps^{1/2}`` against
    ``log(1/eps)``; ``rms_log`` is the residual RMS of the fit that includes
    a ``(log 1/eps)^s`` factor.
    """
    used = [r for r in records if r.sup_val > 0]
    lam = np.array([r.lam for r in used])
    eps = np.array([r.eps for r in used])
    y = np.array([r.sup_val for r in used])
    if not (_span_ok(lam, min_points) and _span_ok(eps, min_points)):
        raise FitError(f"need at least {min_points} distinct values spanning a factor 4 per axis")
    X = np.column_stack([lam, eps])
    pure = PowerLawDecay().fit(X, y)

    comp = y * lam * np.sqrt(eps)
    L = np.log(1 / eps)
    D = np.column_stack([np.ones_like(L), L])
    beta, *_ = np.linalg.lstsq(D, comp, rcond=None)
    r = comp - D @ beta
    dof = len(comp) - 2
    s2 = float(r @ r) / dof
    se = math.sqrt(max(s2 * np.linalg.inv(D.T @ D)[1, 1], 0.0))
    slope = float(beta[1])
    tstat = slope / se if se > 0 else (math.inf if slope > 0 else (-math.inf if slope < 0 else 0.0))

    try:
        aug = PowerLawDecay(log_factor=True).fit(X, y)
        rms_log, log_power = aug.rms_, float(aug.coef_[2])
    except FitError:
        rms_log, log_power = math.nan, math.nan
    return FitResult(
        rho_lambda=float(pure.coef_[0]), rho_eps=float(pure.coef_[1]),
        se_lambda=float(pure.stderr_[0]), se_eps=float(pure.stderr_[1]),
        log_slope=slope, log_slope_se=se, log_tstat=tstat,
        rms=pure.rms_, rms_log=rms_log, log_power=log_power,
        compensated_ratio=float(comp.max() / comp.min()),
        n_used=len(used), n_dropped=len(records) - len(used), s_hint=s_hint,
    )


# -- counterexample profile --------------------------------------------------------

def _cusp_phase():
    x1, x2 = PolyPhase.variables(2)
    return (x2 + x1**2) ** 2


def _composite_gl(f, a, b, panels, order):
    t, w = leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    X = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    W = (half[:, None] * w[None, :]).ravel()
    return X, W


def cusp_factors(chi: CutoffSpec | None = None, psi=None, panels: int = 64, order: int = 20):
    """``int e^{i y^2} chi(8y) dy`` and ``int psi(x1, -x1^2) dx1`` by composite Gauss-Legendre."""
    chi = chi or CutoffSpec()
    psi = psi if psi is not None else BumpSpec(2)
    f1 = 0j
    for a, b in chi.support:
        Y, W = _composite_gl(None, a / 8, b / 8, panels, order)
        f1 += np.sum(W * np.exp(1j * Y * Y) * chi(8 * Y))
    lo, hi = psi.support
    X, W = _composite_gl(None, float(lo[0]), float(hi[0]), panels, order)
    f2 = float(np.sum(W * psi(np.column_stack([X, -X * X]))))
    return complex(f1), f2


def cusp_substituted(lam: float, chi: CutoffSpec | None = None, psi=None,
                     panels: int = 64, order: int = 20) -> complex:
    """``lam^{-1/2} int int e^{i y^2} chi(8y) psi(x1, lam^{-1/2} y - x1^2) dy dx1``.

    This is the cusp integral at ``xi = 0``, ``eps = lam^{-1/2}`` after the
    substitution ``x2 = lam^{-1/2} y - x1^2``; it is evaluated on a tensor
    Gauss-Legendre grid with no oscillation left in ``x1``.
    """
    chi = chi or CutoffSpec()
    psi = psi if psi is not None else BumpSpec(2)
    r = lam**-0.5
    lo, hi = psi.support
    X1, W1 = _composite_gl(None, float(lo[0]), float(hi[0]), panels, order)
    total = 0j
    for a, b in chi.support:
        Y, WY = _composite_gl(None, a / 8, b / 8, max(panels // 4, 4), order)
        gy = WY * np.exp(1j * Y * Y) * chi(8 * Y)
        pts = np.stack(np.broadcast_arrays(X1[:, None], r * Y[None, :] - X1[:, None] ** 2), axis=-1)
        total += np.sum(W1[:, None] * psi(pts) * gy[None, :])
    return complex(r * total)


def counterexample_profile(lam_grid, chi: CutoffSpec | None = None, psi=None,
                           tol: float = 1e-8, check_lambda: float = 64.0) -> dict:
    """Profile ``|I|`` for ``(x2 + x1^2)^2`` at ``xi = 0``, ``eps = lam^{-1/2}``.

    Rows give ``|I| lam^{1/2}``; ``target`` is the product of the two 1-D
    factor integrals; ``exponent`` is the fitted slope of ``log|I|`` against
    ``log lam``.  ``substitution`` compares direct quadrature with the
    substituted form at ``check_lambda``.
    """
    chi = chi or CutoffSpec()
    psi = psi if psi is not None else BumpSpec(2)
    phase = _cusp_phase()
    rows = []
    for lam in lam_grid:
        lam = float(lam)
        res = osc2d(phase, (0.0, 0.0), lam, chi, lam**-0.5, psi, tol=tol)
        rows.append({"lambda": lam, "re": res.value.real, "im": res.value.imag,
                     "absval": abs(res.value), "scaled": abs(res.value) * math.sqrt(lam),
                     "est_error": res.est_error, "nodes_used": res.nodes_used})
    f1, f2 = cusp_factors(chi, psi)
    lam = np.array([r["lambda"] for r in rows])
    absval = np.array([r["absval"] for r in rows])
    slope = float(np.polyfit(np.log(lam), np.log(absval), 1)[0]) if len(rows) >= 2 else math.nan

    direct = osc2d(phase, (0.0, 0.0), check_lambda, chi, check_lambda**-0.5, psi, tol=1e-10)
    subst = cusp_substituted(check_lambda, chi, psi)
    rel = abs(direct.value - subst) / abs(subst)
    return {
        "rows": rows,
        "factor_chi": abs(f1),
        "factor_psi": f2,
        "target": abs(f1) * abs(f2),
        "exponent": slope,
        "substitution": {"lambda": check_lambda, "direct": [direct.value.real, direct.value.imag],
                         "substituted": [subst.real, subst.imag], "rel_diff": rel},
    }


# -- bi-dyadic boxes -----------------------------------------------------------------

@dataclass(frozen=True)
class BoxClass:
    """Box ``{2^{-j_i-1} <= |x_i| <= 2^{1-j_i}}`` (support of the dyadic partition weight).

    ``kind`` is ``"vertex"``, ``"edge"`` or ``"negligible"``; ``label`` is the
    vertex exponent or edge index.  ``norm_exp`` is the exponent ``N`` in the
    rescaled phase ``2^N Phi(2^{-j_1} y_1, 2^{-j_2} y_2)``.  ``band`` is the
    predicted size of ``det Hess Phi`` on the box, ``None`` when the
    dominating monomial has a degenerate Hessian.
    """

    j: tuple
    kind: str
    label: object
    norm_exp: Fraction
    band: float | None
    remainder: float = 0.0

    def rescaled(self, phase: PolyPhase) -> PolyPhase:
        f = [Fraction(1, 2**ji) for ji in self.j]
        return phase.scale_variables(f) * (Fraction(2) ** self.norm_exp)

    def active(self, eps: float, width: float = 1.0) -> bool:
        return self.band is not None and abs(math.log2(self.band / eps)) <= width

    def to_dict(self) -> dict:
        return {"j1": self.j[0], "j2": self.j[1], "kind": self.kind,
                "label": list(self.label) if isinstance(self.label, tuple) else self.label,
                "norm_exp": str(self.norm_exp), "band": self.band, "remainder": self.remainder}


def _dominance_remainder(phase: PolyPhase, alpha, j) -> float:
    """``sup |Phi_j - c_alpha y^alpha| / inf |c_alpha y^alpha|`` bound on ``1/2 <= |y_i| <= 2``."""
    c_a = abs(float(phase.coefficient(alpha)))
    if c_a == 0:
        return math.inf
    den = c_a * 2.0 ** (-(alpha[0] + alpha[1]))
    num = 0.0
    for k, c in phase.terms:
        if tuple(k) == tuple(alpha):
            continue
        expo = (alpha[0] - k[0]) * j[0] + (alpha[1] - k[1]) * j[1] + k[0] + k[1]
        num += abs(float(c)) * 2.0**expo
    return num / den


def _monomial_hessian_nondegenerate(alpha) -> bool:
    a1, a2 = alpha
    return a1 * a2 * (1 - a1 - a2) != 0


def classify_box(phase: PolyPhase, j, poly: NewtonPolygon | None = None, C_edge: float = 2.0,
                 edges=None) -> BoxClass:
    poly = poly or build_polygon(phase)
    edges = edges if edges is not None else edge_data(phase, poly)
    j = (int(j[0]), int(j[1]))
    best = None
    for v in poly.vertices:
        rem = _dominance_remainder(phase, v, j)
        if best is None or rem < best[0]:
            best = (rem, v)
    if best is not None and best[0] < DOMINANCE_TOL:
        rem, v = best
        band = None
        if _monomial_hessian_nondegenerate(v):
            band = 2.0 ** (-2 * ((v[0] - 1) * j[0] + (v[1] - 1) * j[1]))
        return BoxClass(j, "vertex", tuple(v), Fraction(v[0] * j[0] + v[1] * j[1]), band, rem)
    for idx, e in enumerate(edges):
        beta = math.sqrt(float(e.slope_param))
        gap = j[0] / beta - beta * j[1]
        inside = abs(gap) <= C_edge
        # edges that reach an axis also govern the boxes beyond their axis vertex
        if e.meets_axis1 and gap <= C_edge:
            inside = True
        if e.meets_axis2 and -gap <= C_edge:
            inside = True
        if inside:
            N = min(Fraction(a[0] * j[0] + a[1] * j[1]) for a in e.endpoints)
            d = float(e.newton_distance)
            band = 2.0 ** (-2 * (d - 1) * (j[0] + j[1]))
            return BoxClass(j, "edge", idx, N, band, best[0] if best else math.inf)
    return BoxClass(j, "negligible", None, Fraction(0), None, best[0] if best else math.inf)


def _box_meets(j, psi) -> bool:
    lo, hi = psi.support
    lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
    for i, ji in enumerate(j):
        inner, outer = 2.0 ** (-ji - 1), 2.0 ** (1 - ji)
        reach = max(abs(lo[i]), abs(hi[i]))
        if inner >= reach:
            return False
        # the open annulus must meet [lo, hi]
        if not ((hi[i] > inner or lo[i] < -inner) and (lo[i] < outer and hi[i] > -outer)):
            return False
    return True


def classify_boxes(phase: PolyPhase, poly: NewtonPolygon | None = None, eps: float | None = None,
                   C_edge: float = 2.0, j_max: int = 24, psi=None) -> list:
    """Classify every box ``0 <= j_1, j_2 <= j_max`` that meets ``supp psi``.

    Vertex dominance (remainder below 0.1) is tested first, then the edge
    bands ``|j_1/beta - beta j_2| <= C_edge``; the rest is negligible.
    ``eps`` is accepted for symmetry with :func:`active_counts` and unused
    by the classification itself.
    """
    psi = psi if psi is not None else BumpSpec(2)
    poly = poly or build_polygon(phase)
    edges = edge_data(phase, poly)
    out = []
    for j1 in range(j_max + 1):
        for j2 in range(j_max + 1):
            if _box_meets((j1, j2), psi):
                out.append(classify_box(phase, (j1, j2), poly, C_edge, edges))
    return out


def active_counts(boxes, eps: float, width: float = 1.0) -> dict:
    """Number of boxes per class whose predicted band is within ``2^width`` of ``eps``."""
    counts = {"vertex": 0, "edge": 0, "negligible": 0}
    for b in boxes:
        if b.active(eps, width):
            counts[b.kind] += 1
    counts["total"] = counts["vertex"] + counts["edge"]
    return counts


def _box_quadrants(j):
    out = []
    for s1 in (-1, 1):
        for s2 in (-1, 1):
            r = []
            for s, ji in ((s1, j[0]), (s2, j[1])):
                a, b = 2.0 ** (-ji - 1), 2.0 ** (1 - ji)
                r.append((a, b) if s > 0 else (-b, -a))
            out.append(tuple(r))
    return out


def rescale_check(phase: PolyPhase, box: BoxClass, xi=(0.0, 0.0), lam: float = 64.0,
                  eps: float = 0.25, psi=None, chi: CutoffSpec | None = None,
                  tol: float = 1e-12, samples: int = 64, seed: int = 0) -> dict:
    """Compare the box integral with its rescaled form.

    (a) ``int exp(i lam (Phi + xi.x)) chi(u/eps) psi eta_j dx`` computed in
    ``x`` and as ``2^{-j_1-j_2}`` times the integral of the rescaled phase
    ``Phi_j = 2^N Phi(2^{-j} y)`` over ``1/2 <= |y_i| <= 2``, with the cutoff
    ``det Hess Phi_j`` and ``eps`` scaled by ``2^{2N - 2(j_1 + j_2)}``.
    (b) ``det Hess Phi_j(y) = 2^{2N - 2(j_1 + j_2)} u(2^{-j} y)``, exactly and
    at sample points.
    """
    psi = psi if psi is not None else BumpSpec(2)
    chi = chi or CutoffSpec()
    j1, j2 = box.j
    N = box.norm_exp
    u = phase.hessian_det()
    Pj = box.rescaled(phase)
    uj = Pj.hessian_det()
    fac = Fraction(2) ** (2 * N - 2 * (j1 + j2))
    scale = [Fraction(1, 2**j1), Fraction(1, 2**j2)]
    exact_ok = (uj - u.scale_variables(scale) * fac).is_zero()

    rng = np.random.default_rng(seed)
    Y = rng.uniform(0.5, 2.0, (samples, 2)) * rng.choice([-1.0, 1.0], (samples, 2))
    lhs = uj(Y)
    rhs = float(fac) * u(Y * np.array([2.0**-j1, 2.0**-j2]))
    denom = np.maximum(np.abs(rhs), np.abs(lhs))
    hess_rel = float(np.max(np.where(denom > 0, np.abs(lhs - rhs) / np.where(denom > 0, denom, 1), 0.0)))

    xi = np.asarray(xi, float)
    sj = np.array([2.0**-j1, 2.0**-j2])

    def eta_x(X):
        return partition_eta(X[..., 0] / sj[0]) * partition_eta(X[..., 1] / sj[1])

    amp_x = Amplitude(lambda X: psi(X) * eta_x(X), psi.support, min(sj) / 4)
    amp_y = Amplitude(lambda Y: psi(Y * sj) * partition_eta(Y[..., 0]) * partition_eta(Y[..., 1]),
                      (np.array([-2.0, -2.0]), np.array([2.0, 2.0])), 0.125)
    lam_y = lam * 2.0 ** (-float(N))
    xi_y = xi * sj * 2.0 ** float(N)
    eps_y = eps * float(fac)
    lin_x = PolyPhase.linear([Fraction(v) for v in xi])
    lin_y = PolyPhase.linear([Fraction(v) for v in xi_y])

    direct = 0j
    rescaled = 0j
    for q in _box_quadrants(box.j):
        qy = tuple((a / s, b / s) for (a, b), s in zip(q, sj))
        ix = CutoffIntegrator(phase + lin_x, lam, eps, amp_x, chi, cutoff=u, box=q,
                              lambda_cap=math.inf)
        iy = CutoffIntegrator(Pj + lin_y, lam_y, eps_y, amp_y, chi, cutoff=uj, box=qy,
                              lambda_cap=math.inf, order=16)
        if ix.plan.n_panels:
            direct += ix.integrate(tol=tol).value
        if iy.plan.n_panels:
            rescaled += iy.integrate(tol=tol).value
    rescaled *= 2.0 ** (-(j1 + j2))
    mag = max(abs(direct), abs(rescaled))
    rel = abs(direct - rescaled) / mag if mag > 0 else 0.0
    return {
        "j": [j1, j2], "kind": box.kind, "norm_exp": str(N),
        "direct": [direct.real, direct.imag], "rescaled": [rescaled.real, rescaled.imag],
        "integral_rel_diff": rel, "hessian_identity_exact": exact_ok,
        "hessian_rel_diff": hess_rel,
    }
