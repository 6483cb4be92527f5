"""Fold curves of a phase against a nondegenerate cutoff, in two variables.

For ``Phi_xi = Phi + xi.x`` and a cutoff polynomial ``u`` the curve
``gamma`` is the set where ``grad Phi_xi`` is parallel to ``grad u``,
parametrised by ``u(gamma(s)) = s``.  Along it ``f(s) = Phi_xi(gamma(s))``
satisfies ``grad Phi_xi = f'(s) grad u``, and the coarea density of the
order-zero term is

    dphi/ds = |det(gamma', X1)| / sqrt|(Hess Phi - f' Hess u)(X1, X1)|

with ``X1`` the unit tangent of the level set.  Curves are traced by
predictor-corrector continuation on ``(cross(grad Phi_xi, grad u), u - s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bumps import BumpSpec, CutoffSpec
from .oscquad import IntegralValue, osc1d
from .polyphase import PolyPhase

RESID_TOL = 1e-10


class CurveError(ValueError):
    """Tracing failed (rank deficiency or degenerate restricted Hessian)."""

    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = None if point is None else tuple(float(v) for v in point)


@dataclass(frozen=True)
class CutoffFunction:
    """A cutoff polynomial ``u`` (default ``det Hess Phi``)."""

    u: PolyPhase

    @classmethod
    def hessian_det(cls, phase: PolyPhase) -> "CutoffFunction":
        return cls(phase.hessian_det())

    def check(self, window, m: int = 65, tol: float = 1e-12) -> None:
        """Sample ``|grad u|`` on the window; raise on a critical point of ``u``."""
        (a1, b1), (a2, b2) = window
        X = np.stack(np.meshgrid(np.linspace(a1, b1, m), np.linspace(a2, b2, m), indexing="ij"), -1)
        g = np.hypot(*(gi(X) for gi in self.u.gradient()))
        if np.min(g) <= tol:
            k = np.unravel_index(np.argmin(g), g.shape)
            raise CurveError("du vanishes on the window", X[k])


class _System:
    """Polynomial pieces shared by tracing, density and projection."""

    def __init__(self, phase: PolyPhase, xi, u: PolyPhase):
        if phase.dimension != 2 or u.dimension != 2:
            raise ValueError("fold curves are implemented for two variables")
        self.xi = tuple(float(v) for v in xi)
        self.phase = phase + PolyPhase.linear(list(self.xi))
        self.u = u
        self.gphi = self.phase.gradient()
        self.gu = u.gradient()
        self.G = self.gphi[0] * self.gu[1] - self.gphi[1] * self.gu[0]
        self.gG = self.G.gradient()
        self.Hphi = self.phase.hessian()
        self.Hu = u.hessian()

    @staticmethod
    def _vec(polys, X):
        return np.stack([p(X) for p in polys], axis=-1)

    @staticmethod
    def _mat(polys, X):
        return np.stack([np.stack([p(X) for p in row], axis=-1) for row in polys], axis=-2)

    def jac(self, X):
        return np.stack([self._vec(self.gG, X), self._vec(self.gu, X)], axis=-2)

    def tangent(self, X):
        J = self.jac(X)
        rhs = np.broadcast_to(np.array([0.0, 1.0]), J.shape[:-1])
        return np.linalg.solve(J, rhs[..., None])[..., 0]

    def scale_G(self, X):
        return np.maximum(np.linalg.norm(self._vec(self.gphi, X), axis=-1)
                          * np.linalg.norm(self._vec(self.gu, X), axis=-1), 1e-300)

    def correct(self, X, s, iters: int = 30, tol: float = 1e-14):
        """Damped Newton on ``(G, u - s)``; vectorised over rows of ``X``."""
        X = np.array(X, float, copy=True)
        s = np.broadcast_to(np.asarray(s, float), X.shape[:-1])
        ok = np.zeros(X.shape[:-1], dtype=bool)
        for _ in range(iters):
            F = np.stack([self.G(X), self.u(X) - s], axis=-1)
            J = self.jac(X)
            det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
            good = np.abs(det) > 1e-300
            step = np.zeros_like(X)
            step[good] = np.linalg.solve(J[good], F[good][..., None])[..., 0]
            nF = np.linalg.norm(F, axis=-1)
            lam = np.ones(X.shape[:-1])
            Xn = X - step
            for _ in range(8):
                Fn = np.stack([self.G(Xn), self.u(Xn) - s], axis=-1)
                worse = np.linalg.norm(Fn, axis=-1) > nF * (1 - 1e-4 * lam)
                worse &= nF > 0
                if not np.any(worse):
                    break
                lam = np.where(worse, lam / 2, lam)
                Xn = X - lam[..., None] * step
            X = Xn
            scale = 1.0 + np.abs(s) + np.abs(self.u(X))
            ok = (np.abs(self.G(X)) <= tol * self.scale_G(X) * 10 + tol) & (np.abs(self.u(X) - s) <= tol * scale)
            if np.all(ok | ~good):
                break
        return X, ok

    def frame(self, X, Gd):
        """``f'``, ``X1``, restricted Hessian ``Q`` and the full matrix ``M``."""
        gphi = self._vec(self.gphi, X)
        fp = np.einsum("...i,...i->...", gphi, Gd)
        gu = self._vec(self.gu, X)
        nu = np.linalg.norm(gu, axis=-1)
        X1 = np.stack([-gu[..., 1], gu[..., 0]], axis=-1) / nu[..., None]
        M = self._mat(self.Hphi, X) - fp[..., None, None] * self._mat(self.Hu, X)
        Q = np.einsum("...i,...ij,...j->...", X1, M, X1)
        return fp, X1, Q, M


@dataclass
class CurveBranch:
    """One connected piece of the fold curve sampled on a uniform ``s`` grid."""

    s: np.ndarray
    gamma: np.ndarray
    gamma_dot: np.ndarray
    f: np.ndarray
    f1: np.ndarray
    density: np.ndarray
    Q: np.ndarray
    signature: int
    truncated: str | None = None
    _sys: _System = field(default=None, repr=False)

    @property
    def s_range(self):
        return float(self.s[0]), float(self.s[-1])

    def point(self, s):
        """Curve point at arbitrary ``s`` inside the traced range (Hermite guess + Newton)."""
        s = np.atleast_1d(np.asarray(s, float))
        k = np.clip(np.searchsorted(self.s, s) - 1, 0, len(self.s) - 2)
        s0, s1 = self.s[k], self.s[k + 1]
        h = (s1 - s0)[:, None]
        tau = ((s - s0) / (s1 - s0))[:, None]
        h00 = 2 * tau**3 - 3 * tau**2 + 1
        h10 = tau**3 - 2 * tau**2 + tau
        h01 = -2 * tau**3 + 3 * tau**2
        h11 = tau**3 - tau**2
        X0 = (h00 * self.gamma[k] + h10 * h * self.gamma_dot[k]
              + h01 * self.gamma[k + 1] + h11 * h * self.gamma_dot[k + 1])
        X, ok = self._sys.correct(X0, s)
        if not np.all(ok):
            raise CurveError("projection onto the curve failed", X[np.argmin(ok)])
        return X

    def evaluate(self, s):
        """Dictionary of curve quantities at ``s`` (recomputed, not interpolated)."""
        X = self.point(s)
        Gd = self._sys.tangent(X)
        fp, X1, Q, M = self._sys.frame(X, Gd)
        mu = np.abs(Gd[:, 0] * X1[:, 1] - Gd[:, 1] * X1[:, 0])
        dens = mu / np.sqrt(np.abs(Q))
        return {"gamma": X, "gamma_dot": Gd, "f": self._sys.phase(X), "f1": fp,
                "Q": Q, "M": M, "X1": X1, "density": dens}

    def residuals(self):
        u_res = np.abs(self._sys.u(self.gamma) - self.s)
        # relative where the gradients are large, absolute near critical points
        g_res = np.abs(self._sys.G(self.gamma)) / np.maximum(self._sys.scale_G(self.gamma), 1.0)
        return float(u_res.max(initial=0.0)), float(g_res.max(initial=0.0))


@dataclass
class FoldCurve:
    branches: list
    s_grid: np.ndarray
    diagnostics: list = field(default_factory=list)

    def __len__(self):
        return len(self.branches)

    def rows(self):
        """Per-sample rows ``(branch, s, g1, g2, f, f', dphi/ds)``."""
        out = []
        for b, br in enumerate(self.branches):
            for i in range(len(br.s)):
                out.append((b, br.s[i], br.gamma[i, 0], br.gamma[i, 1], br.f[i], br.f1[i], br.density[i]))
        return out


def _seeds(sysm: _System, window, s, m=64):
    (a1, b1), (a2, b2) = window
    x = np.linspace(a1, b1, m + 1)
    y = np.linspace(a2, b2, m + 1)
    X = np.stack(np.meshgrid(x, y, indexing="ij"), -1)
    G = sysm.G(X)
    U = sysm.u(X) - s
    def changes(V):
        c = np.stack([V[:-1, :-1], V[1:, :-1], V[:-1, 1:], V[1:, 1:]], -1)
        return (c.min(-1) <= 0) & (c.max(-1) >= 0)
    cells = np.argwhere(changes(G) & changes(U))
    if not len(cells):
        return np.zeros((0, 2))
    centers = np.stack([0.5 * (x[cells[:, 0]] + x[cells[:, 0] + 1]),
                        0.5 * (y[cells[:, 1]] + y[cells[:, 1] + 1])], -1)
    P, ok = sysm.correct(centers, s)
    inside = ok & (P[:, 0] >= a1) & (P[:, 0] <= b1) & (P[:, 1] >= a2) & (P[:, 1] <= b2)
    P = P[inside]
    tol = 1e-7 * max(b1 - a1, b2 - a2)
    uniq = []
    for p in P[np.lexsort((P[:, 1], P[:, 0]))]:
        if all(np.linalg.norm(p - q) > tol for q in uniq):
            uniq.append(p)
    return np.array(uniq).reshape(-1, 2)


def _in_window(x, window):
    (a1, b1), (a2, b2) = window
    return a1 <= x[0] <= b1 and a2 <= x[1] <= b2


def _trace_from(sysm, window, grid, k0, x0, max_halvings=12):
    """Continue from ``(grid[k0], x0)`` in both directions; return (indices, points, note)."""
    pts = {k0: x0}
    notes = []
    for direction in (1, -1):
        k, x = k0, x0
        while 0 <= k + direction < len(grid):
            s_from, s_to = grid[k], grid[k + direction]
            cur_s, cur_x = s_from, x
            sub = 1
            failed = False
            while cur_s != s_to:
                ds = (s_to - s_from) / sub
                nxt = s_to if abs(s_to - cur_s) <= abs(ds) * (1 + 1e-12) else cur_s + ds
                try:
                    pred = cur_x + (nxt - cur_s) * sysm.tangent(cur_x[None])[0]
                except np.linalg.LinAlgError:
                    notes.append(f"rank deficiency near s={cur_s:.6g}")
                    failed = True
                    break
                X, ok = sysm.correct(pred[None], nxt)
                if ok[0] and np.linalg.norm(X[0] - pred) <= 0.25 * max(np.linalg.norm(pred - cur_x), 1e-12) + 1e-9:
                    cur_s, cur_x = nxt, X[0]
                elif sub < 2**max_halvings:
                    sub *= 2
                else:
                    notes.append(f"corrector diverged near s={cur_s:.6g}")
                    failed = True
                    break
            if failed:
                break
            if not _in_window(cur_x, window):
                notes.append(f"left window at s={s_to:.6g}")
                break
            k, x = k + direction, cur_x
            pts[k] = x
    ks = sorted(pts)
    return np.array(ks), np.array([pts[k] for k in ks]), "; ".join(notes) or None


def trace_curve(phase: PolyPhase, xi, u: PolyPhase | None, window, s_range,
                n_samples: int = 129, n_seeds: int = 5, seed_grid: int = 64) -> FoldCurve:
    """Trace every branch of ``{grad Phi_xi || grad u}`` with ``u`` in ``s_range``.

    Seeds are located at ``n_seeds`` levels by sign changes of the cross
    product on a ``seed_grid`` mesh of ``window`` and refined by Newton; each
    new seed is continued across the uniform grid of ``n_samples`` levels.
    """
    u = u if u is not None else phase.hessian_det()
    sysm = _System(phase, xi, u)
    window = tuple((float(a), float(b)) for a, b in window)
    s0, s1 = float(s_range[0]), float(s_range[1])
    if not s1 > s0:
        raise ValueError("s_range must be increasing")
    grid = np.linspace(s0, s1, n_samples)
    seed_idx = np.unique(np.linspace(0, n_samples - 1, n_seeds).round().astype(int))
    branches_raw = []
    diags = []
    for k in seed_idx:
        for x in _seeds(sysm, window, grid[k], seed_grid):
            dup = False
            for ks, X, _ in branches_raw:
                hit = np.nonzero(ks == k)[0]
                if len(hit) and np.linalg.norm(X[hit[0]] - x) < 1e-6 * (1 + np.linalg.norm(x)):
                    dup = True
                    break
            if dup:
                continue
            J = sysm.jac(x[None])[0]
            if abs(np.linalg.det(J)) <= 1e-12 * (1 + np.abs(J).max() ** 2):
                raise CurveError("rank deficiency at seed", x)
            ks, X, note = _trace_from(sysm, window, grid, k, x)
            branches_raw.append((ks, X, note))
            if note:
                diags.append(note)
    branches = []
    for ks, X, note in branches_raw:
        if len(ks) < 2:
            continue
        s = grid[ks]
        Gd = sysm.tangent(X)
        fp, X1, Q, _ = sysm.frame(X, Gd)
        if np.any(np.abs(Q) <= 1e-10 * (1 + np.abs(fp))):
            raise CurveError("restricted Hessian degenerates on the curve", X[np.argmin(np.abs(Q))])
        if np.any(np.sign(Q) != np.sign(Q[0])):
            raise CurveError("restricted Hessian changes sign along a branch", X[0])
        mu = np.abs(Gd[:, 0] * X1[:, 1] - Gd[:, 1] * X1[:, 0])
        branches.append(CurveBranch(s=s, gamma=X, gamma_dot=Gd, f=sysm.phase(X), f1=fp,
                                    density=mu / np.sqrt(np.abs(Q)), Q=Q,
                                    signature=int(np.sign(Q[0])), truncated=note, _sys=sysm))
    branches.sort(key=lambda b: (b.s[0], b.gamma[0, 0], b.gamma[0, 1]))
    return FoldCurve(branches=branches, s_grid=grid, diagnostics=diags)


def curve_density(curve: FoldCurve | CurveBranch):
    """Coarea densities ``dphi/ds`` per branch sample."""
    if isinstance(curve, CurveBranch):
        return curve.density
    return [b.density for b in curve.branches]


def reduced_f2(branch: CurveBranch, s) -> np.ndarray:
    """``sign(Q) det(Hess Phi - f' Hess u) (dphi/ds)^2`` at ``s`` (Lebesgue ``mu``)."""
    q = branch.evaluate(s)
    det = np.linalg.det(q["M"])
    return np.sign(q["Q"]) * det * q["density"] ** 2


def numeric_f2(branch: CurveBranch, s, h: float | None = None) -> np.ndarray:
    """Fourth-order central second difference of ``f(s) = Phi_xi(gamma(s))``."""
    s = np.atleast_1d(np.asarray(s, float))
    lo, hi = branch.s_range
    if h is None:
        h = 1e-3 * (hi - lo)
    f = lambda v: branch._sys.phase(branch.point(v))
    return (-f(s - 2 * h) + 16 * f(s - h) - 30 * f(s) + 16 * f(s + h) - f(s + 2 * h)) / (12 * h * h)


def numeric_f1(branch: CurveBranch, s, h: float | None = None) -> np.ndarray:
    s = np.atleast_1d(np.asarray(s, float))
    lo, hi = branch.s_range
    if h is None:
        h = 1e-3 * (hi - lo)
    f = lambda v: branch._sys.phase(branch.point(v))
    return (f(s - 2 * h) - 8 * f(s - h) + 8 * f(s + h) - f(s + 2 * h)) / (12 * h)


@dataclass
class ReducedIntegrand:
    """``omega(s) = cut(s) psi(gamma(s)) dphi/ds`` on one branch with its norms."""

    branch: CurveBranch
    cut: object
    psi: object
    sup: float = 0.0
    deriv_l1: float = 0.0
    l1: float = 0.0

    def __call__(self, s):
        q = self.branch.evaluate(s)
        return self.cut(np.asarray(s, float)) * self.psi(q["gamma"]) * q["density"]

    def compute_norms(self, samples: int = 4097, tol: float = 1e-8) -> "ReducedIntegrand":
        """Norms from samples, doubled until the ``L1`` and variation settle to ``tol``."""
        lo, hi = self.branch.s_range
        prev = None
        n = samples
        while True:
            s = np.linspace(lo, hi, n)
            w = self(s)
            l1 = float(np.trapezoid(np.abs(w), s))
            tv = float(np.sum(np.abs(np.diff(w))))
            sup = float(np.max(np.abs(w)))
            if prev is not None and abs(l1 - prev[0]) <= tol * max(l1, 1e-300) * 10 \
                    and abs(tv - prev[1]) <= tol * max(tv, 1e-300) * 10:
                break
            if n > 2**18:
                break
            prev = (l1, tv)
            n = 2 * n - 1
        self.sup, self.deriv_l1, self.l1 = sup, tv, l1
        return self


def reduced_expansion0(phase: PolyPhase, xi, u: PolyPhase | None, chi: CutoffSpec | None,
                       eps: float, psi=None, t: float = 1e-2, window=None,
                       n_samples: int = 129, tol: float = 1e-10) -> IntegralValue:
    """Order-zero term ``sqrt(2 pi) sum_branches e^{i pi omega/4} int e^{i f/t} chi(s/eps) psi dphi``.

    It approximates ``t^{-1/2} int exp(i Phi_xi / t) chi(u/eps) psi dx``; all
    branches of the fold curve inside ``window`` (default ``supp psi``) are
    summed.
    """
    psi = psi if psi is not None else BumpSpec(2)
    chi = chi or CutoffSpec()
    u = u if u is not None else phase.hessian_det()
    if window is None:
        lo, hi = psi.support
        window = tuple(zip(np.atleast_1d(lo), np.atleast_1d(hi)))
    total = 0j
    err = 0.0
    nodes = 0
    for a, b in chi.support:
        s_range = (a * eps, b * eps)
        curve = trace_curve(phase, xi, u, window, s_range, n_samples=n_samples)
        for br in curve.branches:
            cut = lambda s: chi(np.asarray(s) / eps)
            if br.truncated and "left window" not in br.truncated:
                edge = br.gamma[[0, -1]]
                if np.max(np.abs(psi(edge) * cut(br.s[[0, -1]]))) > 1e-12:
                    raise CurveError(f"curve truncated inside the support: {br.truncated}", edge[0])
            sys_ = br._sys
            f = lambda s, br=br: sys_.phase(br.point(s))
            fp = lambda s, br=br: br.evaluate(s)["f1"]
            om = lambda s, br=br: cut(s) * psi(br.point(s)) * br.evaluate(s)["density"]
            lo_s, hi_s = br.s_range
            if hi_s <= lo_s:
                continue
            val = osc1d(f, om, t, (lo_s, hi_s), fprime=fp, tol=tol)
            phase_factor = np.exp(1j * math.pi * br.signature / 4)
            total += phase_factor * val.value
            err += val.est_error
            nodes += val.nodes_used
    c = math.sqrt(2 * math.pi)
    return IntegralValue(c * total, c * err, nodes)
