"""Schrödinger operator of a phase near a nondegenerate critical point.

Everything lives in flat ``R^n``: geodesics from ``p`` are straight segments
and parallel transport is trivial.  With ``v = x - p`` and
``Psi(v) = Phi(p + v) - Phi(p)``:

* ``A_sigma(v) = sigma * int_0^1 (1-s)^(sigma-1) Hess Psi(s v) ds`` (weighted Hessian),
* ``a = A_1^{-1} A_2 A_1^{-1}`` and ``R = tr(a Hess Psi)`` (so ``R(0) = n``),
* ``eta(v) = int_0^1 (n - R(s v)) ds / s``, ``b = A_1^{-1} grad eta``,
* ``box f = tr(a Hess f) + b . grad f``.

Then ``(d/dt - (i/2) box) [t^{-n/2} exp(i Psi / t)] = 0`` and the stationary
phase coefficients are ``(i/2)^l / l! * (box*)^l psi(p)`` times the leading
prefactor, where ``box* g = sum d_j d_k (a^{jk} g) - sum d_j (b^j g)``.

Two differentiation routes are provided for ``box*``: exact Taylor jets
(default) and nested fourth-order finite differences (independent check).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial.legendre import leggauss

from .bumps import BumpSpec
from .jets import JetAlgebra
from .polyphase import PolyPhase, _frac

JET_MAX_ELL = 6
FD_MAX_ELL = 4
DET_TOL = 1e-10


class DegenerateError(ValueError):
    """Raised when a weighted Hessian or critical point is degenerate."""

    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = None if point is None else tuple(float(v) for v in point)


# -- weighted Hessians ------------------------------------------------------

def beta_weight(sigma, m: int):
    """``sigma * int_0^1 (1-s)^(sigma-1) s^m ds = m! / prod_{i=1..m} (sigma + i)``."""
    exact = isinstance(sigma, (int, Fraction))
    w = Fraction(1) if exact else 1.0
    for i in range(1, m + 1):
        w = w * i / ((_frac(sigma) if exact else sigma) + i)
    return w


def weighted_hessian_poly(phase: PolyPhase, p, sigma) -> tuple:
    """Matrix of polynomials ``v -> A_sigma(v)`` for the segment ``p -> p + v``.

    Exact when ``sigma`` is an int or Fraction (Beta moments of each
    homogeneous part of ``Hess Psi``).
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    H = phase.shift(p).hessian()
    n = phase.dimension
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            h = H[i][j]
            acc = PolyPhase(n)
            for m in range(h.degree + 1 if not h.is_zero() else 0):
                part = h.homogeneous_part(m)
                if not part.is_zero():
                    w = beta_weight(sigma, m)
                    acc = acc + part * (w if isinstance(w, Fraction) else Fraction(w))
            row.append(acc)
        out.append(tuple(row))
    return tuple(out)


def weighted_hessian(phase, p, sigma, q, exact: bool = False, tol: float = 1e-13):
    """``sigma * int_0^1 (1-s)^(sigma-1) Hess Phi(p + s(q-p)) ds``.

    ``phase`` is a :class:`PolyPhase` (exact Beta moments) or a callable
    returning the ``(n, n)`` Hessian at a point (adaptive Gauss-Legendre
    after the substitution ``w = (1-s)^sigma``).  With ``exact=True`` and a
    polynomial phase the result is a nested tuple of Fractions.
    """
    if isinstance(phase, PolyPhase):
        A = weighted_hessian_poly(phase, p, sigma)
        v = [_frac(b) - _frac(a) for a, b in zip(p, q)]
        if exact:
            return tuple(tuple(e.eval(v, "rational") for e in row) for row in A)
        vf = np.array([float(c) for c in v])
        return np.array([[e(vf) for e in row] for row in A])
    p = np.asarray(p, float)
    d = np.asarray(q, float) - p
    sigma = float(sigma)
    if sigma <= 0:
        raise ValueError("sigma must be positive")

    def rule(order):
        t, w = leggauss(order)
        wv = 0.5 * (t + 1.0)
        s = 1.0 - wv ** (1.0 / sigma)
        return sum(0.5 * wk * np.asarray(phase(p + sk * d), float) for sk, wk in zip(s, w))

    order = 8
    prev = rule(order)
    while order < 4096:
        order *= 2
        cur = rule(order)
        if np.max(np.abs(cur - prev)) <= tol * max(1.0, np.max(np.abs(cur))):
            return cur
        prev = cur
    return cur


# -- critical points ----------------------------------------------------------

@dataclass(frozen=True)
class CriticalPoint:
    p: tuple
    hessian: np.ndarray
    signature: int
    det: float

    @classmethod
    def of(cls, phase: PolyPhase, p, grad_tol: float = 1e-10) -> "CriticalPoint":
        p = tuple(float(v) for v in p)
        g = np.array([gi.eval(p, "binary64") for gi in phase.gradient()])
        H = np.array([[h.eval(p, "binary64") for h in row] for row in phase.hessian()])
        scale = max(1.0, float(np.max(np.abs(H))))
        if np.max(np.abs(g), initial=0.0) > grad_tol * scale:
            raise DegenerateError(f"gradient {g.tolist()} does not vanish at p", p)
        det = float(np.linalg.det(H))
        if abs(det) <= DET_TOL:
            raise DegenerateError("Hessian is singular at the critical point", p)
        ev = np.linalg.eigvalsh(H)
        sig = int(np.sum(ev > 0) - np.sum(ev < 0))
        return cls(p=p, hessian=H, signature=sig, det=det)

    def to_dict(self) -> dict:
        return {"p": list(self.p), "hessian": self.hessian.tolist(),
                "signature": self.signature, "det": self.det}


# -- the operator -----------------------------------------------------------------

def _poly_matrix_eval(M, V):
    return np.stack([np.stack([e(V) for e in row], axis=-1) for row in M], axis=-2)


class SchrodOperator:
    """Coefficients ``a``, ``b`` of ``box`` for ``phase`` around ``p``.

    Points passed to the evaluators are in the original coordinates ``x``.
    """

    def __init__(self, phase: PolyPhase, p, box=None, density: PolyPhase | None = None,
                 eta_nodes: int = 16, check_grid: int = 33):
        self.phase = phase
        self.n = n = phase.dimension
        self.p_exact = tuple(_frac(v) for v in p)
        self.p = np.array([float(v) for v in self.p_exact])
        self.density = density
        self.psi_shift = phase.shift(self.p_exact) - phase.eval(self.p_exact, "rational")
        self.hess = self.psi_shift.hessian()
        self.A1 = weighted_hessian_poly(phase, self.p_exact, 1)
        self.A2 = weighted_hessian_poly(phase, self.p_exact, 2)
        self.quadratic = phase.degree <= 2
        s, w = leggauss(eta_nodes)
        self._s = 0.5 * (s + 1.0)
        self._w = 0.5 * w
        self.box = None if box is None else tuple((float(a), float(b)) for a, b in box)
        if self.box is not None:
            self._check_box(check_grid)
        if self.quadratic:
            H = np.array([[float(e.coefficient((0,) * n)) for e in row] for row in self.hess])
            self._ainv_const = np.linalg.inv(H)

    def _check_box(self, m):
        axes = [np.linspace(a, b, m) for a, b in self.box]
        X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
        d = np.linalg.det(_poly_matrix_eval(self.A1, X - self.p))
        bad = np.abs(d) <= DET_TOL
        if not np.any(bad) and np.any(np.sign(d) != np.sign(d[0])):
            # a sign change means the determinant vanishes between samples
            bad = np.sign(d) != np.sign(d[0])
        if np.any(bad):
            raise DegenerateError("weighted Hessian is singular inside the box", X[np.argmax(bad)])

    # pointwise evaluators ------------------------------------------------------
    def _v(self, X):
        return np.asarray(X, float) - self.p

    def a(self, X) -> np.ndarray:
        V = self._v(X)
        if self.quadratic:
            return np.broadcast_to(self._ainv_const, V.shape[:-1] + (self.n, self.n)).copy()
        A1i = np.linalg.inv(_poly_matrix_eval(self.A1, V))
        return A1i @ _poly_matrix_eval(self.A2, V) @ A1i

    def box0_phase(self, X) -> np.ndarray:
        """``R = tr(a Hess Phi)``; equals ``n`` at ``p``."""
        return np.einsum("...ij,...ji->...", self.a(X), _poly_matrix_eval(self.hess, self._v(X)))

    def eta(self, X) -> np.ndarray:
        """``int_0^1 (n - R(p + s v)) ds / s`` by Gauss-Legendre (interior nodes)."""
        V = self._v(X)
        out = np.zeros(V.shape[:-1])
        for s, w in zip(self._s, self._w):
            out += w * (self.n - self.box0_phase(self.p + s * V)) / s
        return out

    def grad_eta(self, X) -> np.ndarray:
        """``-int_0^1 grad R(p + s v) ds``."""
        if self.quadratic:
            return np.zeros(np.shape(X))
        return self._b_jets(self._v(X), 0, grad_only=True)[..., 0]

    def b(self, X) -> np.ndarray:
        if self.quadratic:
            return np.zeros(np.shape(X))
        ge = self.grad_eta(X)
        A1 = _poly_matrix_eval(self.A1, self._v(X))
        return np.linalg.solve(A1, ge[..., None])[..., 0]

    def apply(self, grad_f, hess_f, X) -> np.ndarray:
        """``box f`` from values of ``grad f`` and ``Hess f`` at ``X``."""
        return (np.einsum("...ij,...ji->...", self.a(X), hess_f)
                + np.einsum("...i,...i->...", self.b(X), grad_f))

    # jets ------------------------------------------------------------------------
    def _a_jets(self, alg: JetAlgebra, V):
        n = self.n
        A1 = np.stack([np.stack([alg.from_poly(e, V) for e in row], axis=-2) for row in self.A1], axis=-3)
        A2 = np.stack([np.stack([alg.from_poly(e, V) for e in row], axis=-2) for row in self.A2], axis=-3)
        A1i = alg.matinv(A1)
        return alg.matmul(alg.matmul(A1i, A2), A1i), A1i

    def _b_jets(self, V, K: int, grad_only: bool = False):
        """Jets of ``b`` (or of ``grad eta``) at ``V`` of order ``K``; shape ``(..., n, size)``."""
        n = self.n
        alg = JetAlgebra(n, K)
        alg1 = JetAlgebra(n, K + 1)
        keep = np.array([alg1.index[e] for e in alg.exps])
        ge = alg.zeros(V.shape[:-1] + (n,))
        for s, w in zip(self._s, self._w):
            Vs = s * V
            a1, _ = self._a_jets(alg1, Vs)
            H1 = np.stack([np.stack([alg1.from_poly(e, Vs) for e in row], axis=-2) for row in self.hess], axis=-3)
            R1 = alg1.trace_mul(a1, H1)
            R1 = alg1.scale_increment(R1, np.full(V.shape[:-1], s))
            # d/dd_i of R(s(v + d)) = s (dR)(s(v+d)); divide by s
            for i in range(n):
                ge[..., i, :] -= w * alg1.deriv(R1, i)[..., keep] / s
        if grad_only:
            return ge
        A1 = np.stack([np.stack([alg.from_poly(e, V) for e in row], axis=-2) for row in self.A1], axis=-3)
        A1i = alg.matinv(A1)
        return alg.mul(A1i, ge[..., None, :, :]).sum(axis=-2)

    def coefficient_jets(self, X, K: int):
        """Jets ``(a, b)`` of order ``K`` at points ``X``."""
        V = self._v(np.asarray(X, float))
        alg = JetAlgebra(self.n, K)
        if self.quadratic:
            a = alg.const(np.broadcast_to(self._ainv_const, V.shape[:-1] + (self.n, self.n)))
            return a, alg.zeros(V.shape[:-1] + (self.n,))
        a, _ = self._a_jets(alg, V)
        return a, self._b_jets(V, K)

    def to_dict(self) -> dict:
        return {"dimension": self.n, "p": self.p.tolist(), "quadratic": self.quadratic,
                "box": None if self.box is None else [list(b) for b in self.box]}


def build_box(phase: PolyPhase, p, box=None, density: PolyPhase | None = None,
              **kw) -> SchrodOperator:
    """Construct ``box`` on the box ``box`` (list of per-axis intervals) around ``p``."""
    CriticalPoint.of(phase, p)
    if box is None:
        box = tuple((float(c) - 0.5, float(c) + 0.5) for c in p)
    return SchrodOperator(phase, p, box=box, density=density, **kw)


def pde_residual(op: SchrodOperator, t: float, X, relative: bool = False):
    """``(d/dt - (i/2) box) K`` for ``K = t^{-n/2} exp(i (Phi - Phi(p)) / t)``.

    Derivatives of ``Phi`` are exact; ``a`` and ``b`` are numeric.  With
    ``relative=True`` the residual is divided by ``|dK/dt|``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    X = np.asarray(X, float)
    V = op._v(X)
    n = op.n
    Psi = op.psi_shift(V)
    g = np.stack([gi(V) for gi in op.psi_shift.gradient()], axis=-1)
    H = _poly_matrix_eval(op.hess, V)
    K = t ** (-n / 2) * np.exp(1j * Psi / t)
    dK_dt = (-n / (2 * t) - 1j * Psi / t**2) * K
    grad_K = (1j / t) * g * K[..., None]
    hess_K = ((1j / t) * H - np.einsum("...i,...j->...ij", g, g) / t**2) * K[..., None, None]
    res = dK_dt - 0.5j * op.apply(grad_K, hess_K, X)
    if relative:
        return res / np.abs(dK_dt)
    return res


# -- adjoint ----------------------------------------------------------------------

def _amplitude_jet(psi, alg, X):
    if hasattr(psi, "jet"):
        return psi.jet(alg, X)
    raise TypeError("amplitude must provide jet(alg, x0) for the jet route")


def _adjoint_jets(op: SchrodOperator, psi, X, ells) -> list:
    """Values of ``(box*)^l psi`` at ``X`` for each ``l`` in ``ells`` (one jet pass)."""
    top = max(ells)
    K = 2 * top
    alg = JetAlgebra(op.n, K)
    g = _amplitude_jet(psi, alg, X)
    mu = op.density(X) if op.density is not None else None
    if mu is not None:
        g = alg.mul(g, alg.from_poly(op.density, X))
    if top:
        a, b = op.coefficient_jets(X, K)
    out = {}
    for ell in range(top + 1):
        if ell in ells:
            out[ell] = g[..., 0] / mu if mu is not None else g[..., 0].copy()
        if ell == top:
            break
        new = alg.zeros(g.shape[:-1])
        for j in range(op.n):
            for k in range(op.n):
                new += alg.deriv(alg.deriv(alg.mul(a[..., j, k, :], g), j), k)
            if not op.quadratic:
                new -= alg.deriv(alg.mul(b[..., j, :], g), j)
        g = new
    return [out[ell] for ell in ells]


def _stencil(n):
    offs = [np.zeros(n)]
    for i in range(n):
        for m in (-2, -1, 1, 2):
            e = np.zeros(n)
            e[i] = m
            offs.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            for mi in (-2, -1, 1, 2):
                for mj in (-2, -1, 1, 2):
                    e = np.zeros(n)
                    e[i], e[j] = mi, mj
                    offs.append(e)
    return np.array(offs)


_D1 = {-2: 1.0 / 12, -1: -8.0 / 12, 1: 8.0 / 12, 2: -1.0 / 12}
_D2 = {-2: -1.0 / 12, -1: 16.0 / 12, 0: -30.0 / 12, 1: 16.0 / 12, 2: -1.0 / 12}


class _FDCoefficients:
    """Pointwise ``a`` and an independent ``b`` with ``grad eta`` by central differences."""

    def __init__(self, op: SchrodOperator, h: float):
        self.op = op
        self.h = h

    def a(self, X):
        return self.op.a(X)

    def b(self, X):
        op = self.op
        if op.quadratic:
            return np.zeros(np.shape(X))
        X = np.asarray(X, float)
        ge = np.zeros(X.shape)
        for i in range(op.n):
            e = np.zeros(op.n)
            e[i] = self.h
            ge[..., i] = sum(c * op.eta(X + m * e) for m, c in _D1.items()) / self.h
        A1 = _poly_matrix_eval(op.A1, op._v(X))
        return np.linalg.solve(A1, ge[..., None])[..., 0]


def _adjoint_fd(op, psi, X, ell, steps, coef):
    X = np.asarray(X, float)
    if ell == 0:
        val = psi(X)
        if op.density is not None:
            val = val * op.density(X)
        return val
    n = op.n
    h = steps[ell - 1] * np.maximum(np.max(np.abs(X), axis=-1), 1.0)
    offs = _stencil(n)
    Y = X[..., None, :] + h[..., None, None] * offs
    G = _adjoint_fd(op, psi, Y, ell - 1, steps, coef)
    A = coef.a(Y)
    B = coef.b(Y)
    idx = {tuple(o.astype(int)): k for k, o in enumerate(offs)}
    out = np.zeros(X.shape[:-1])
    for j in range(n):
        for k in range(n):
            F = A[..., j, k] * G
            if j == k:
                acc = sum(c * F[..., idx[tuple(m * (np.arange(n) == j).astype(int))]]
                          for m, c in _D2.items())
            else:
                acc = 0.0
                for mj, cj in _D1.items():
                    for mk, ck in _D1.items():
                        o = np.zeros(n, dtype=int)
                        o[j], o[k] = mj, mk
                        acc = acc + cj * ck * F[..., idx[tuple(o)]]
            out = out + acc / h**2
        F = B[..., j] * G
        acc = sum(c * F[..., idx[tuple(m * (np.arange(n) == j).astype(int))]] for m, c in _D1.items())
        out = out - acc / h
    return out


def adjoint_apply(op: SchrodOperator, psi, X, ell: int, method: str = "jet",
                  steps=None) -> np.ndarray:
    """``(box*)^ell psi`` at points ``X`` (adjoint relative to the operator's density).

    ``method="jet"`` differentiates exactly through Taylor jets
    (``ell <= 6``); ``method="fd"`` nests fourth-order central differences
    (``ell <= 4``), with per-level steps ``steps`` (innermost first).
    """
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    X = np.asarray(X, float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if method == "jet":
        if ell > JET_MAX_ELL:
            raise ValueError(f"ell={ell} exceeds the jet budget {JET_MAX_ELL}")
        out = _adjoint_jets(op, psi, X, [ell])[0]
    elif method == "fd":
        if ell > FD_MAX_ELL:
            raise ValueError(f"ell={ell} exceeds the finite-difference budget {FD_MAX_ELL}")
        if steps is None:
            steps = [2e-3 * 1.5**k for k in range(ell)]
        coef = _FDCoefficients(op, 1e-3)
        out = _adjoint_fd(op, psi, X, ell, list(steps), coef)
    else:
        raise ValueError(f"unknown method {method!r}")
    return out[0] if single else out


# -- expansion ------------------------------------------------------------------------

@dataclass
class ExpansionResult:
    critical: CriticalPoint
    coefficients: list
    prefactor: complex
    N: int
    k: int
    l1_low: float | None = None
    l1_high: float | None = None
    adjoint_values: list = field(default_factory=list)

    def predict(self, t) -> complex:
        """``sum_l c_l t^l``: the asymptotic value of ``t^{-n/2} int exp(i(Phi-Phi(p))/t) psi``."""
        return sum(c * t**l for l, c in enumerate(self.coefficients))

    def error_functional(self, t) -> float:
        """``t^{N+1} L1_{N+1}^{1-n/(2k)} L1_{N+k+1}^{n/(2k)}`` (implied constant omitted)."""
        if self.l1_low is None:
            raise ValueError("error integrals were not computed")
        n = len(self.critical.p)
        r = n / (2 * self.k)
        return t ** (self.N + 1) * self.l1_low ** (1 - r) * self.l1_high**r

    def to_dict(self) -> dict:
        return {
            "critical_point": self.critical.to_dict(),
            "prefactor": {"re": self.prefactor.real, "im": self.prefactor.imag},
            "coefficients": [{"re": c.real, "im": c.imag} for c in self.coefficients],
            "N": self.N,
            "k": self.k,
            "error_integrals": {"order_N_plus_1": self.l1_low, "order_N_plus_k_plus_1": self.l1_high},
        }


def leading_prefactor(crit: CriticalPoint, density_at_p: float = 1.0) -> complex:
    """``(2 pi)^{n/2} e^{i pi omega / 4} mu(p) / sqrt|det Hess Phi(p)|``."""
    n = len(crit.p)
    return complex((2 * math.pi) ** (n / 2) * np.exp(1j * math.pi * crit.signature / 4)
                   * density_at_p / math.sqrt(abs(crit.det)))


def _l1_nodes(psi, n, levels=8, order=6):
    """Tensor rule on ``supp psi`` with panels graded geometrically toward the edges.

    High derivatives of the bump concentrate at distance ~ 1/order from the
    boundary, so uniform panels under-resolve them.
    """
    lo, hi = psi.support
    t, w = leggauss(order)
    inner = [1.0 - 2.0**-k for k in range(1, levels + 1)]
    ref = np.array(sorted({-1.0, 0.0, 1.0, *inner, *(-y for y in inner)}))
    axes, wts = [], []
    for a, b in zip(np.atleast_1d(lo), np.atleast_1d(hi)):
        e = a + (b - a) * 0.5 * (ref + 1.0)
        h = 0.5 * np.diff(e)
        m = 0.5 * (e[1:] + e[:-1])
        axes.append((m[:, None] + h[:, None] * t).ravel())
        wts.append((h[:, None] * w).ravel())
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    W = np.ones(len(X))
    for g in np.meshgrid(*wts, indexing="ij"):
        W = W * g.reshape(-1)
    return X, W


def expansion(phase: PolyPhase, psi=None, p=None, N: int = 2, k: int | None = None,
              density: PolyPhase | None = None, error_integrals: bool = True,
              chunk: int = 256, quad_levels: int = 8, quad_order: int = 6) -> ExpansionResult:
    """Stationary-phase coefficients ``c_0..c_N`` with the error integrals.

    ``c_l = prefactor * (i/2)^l / l! * (box*)^l psi(p)``; the error integrals
    are ``int |(box*)^{N+1} psi| dmu`` and ``int |(box*)^{N+k+1} psi| dmu``.
    """
    n = phase.dimension
    psi = psi if psi is not None else BumpSpec(n)
    p = tuple(p) if p is not None else (0.0,) * n
    k = k if k is not None else n // 2 + 1
    if 2 * k <= n:
        raise ValueError("k must exceed n/2")
    if N < 0:
        raise ValueError("N must be nonnegative")
    if error_integrals and N + k + 1 > JET_MAX_ELL:
        raise ValueError(f"N + k + 1 = {N + k + 1} exceeds the adjoint budget {JET_MAX_ELL}")
    crit = CriticalPoint.of(phase, p)
    lo, hi = psi.support
    op = build_box(phase, p, box=list(zip(np.atleast_1d(lo), np.atleast_1d(hi))), density=density)
    mu_p = 1.0 if density is None else float(density.eval(list(p), "binary64"))
    pref = leading_prefactor(crit, mu_p)
    P = np.array([crit.p])
    vals = [float(adjoint_apply(op, psi, P, l)[0]) for l in range(N + 1)]
    coeffs = [pref * (0.5j) ** l / math.factorial(l) * v for l, v in enumerate(vals)]
    res = ExpansionResult(crit, coeffs, pref, N, k, adjoint_values=vals)
    if error_integrals:
        X, W = _l1_nodes(psi, n, quad_levels, quad_order)
        if density is not None:
            W = W * np.abs(density(X))
        ells = [N + 1, N + k + 1]
        norms = np.zeros(2)
        for s in range(0, len(X), chunk):
            vals = _adjoint_jets(op, psi, X[s:s + chunk], ells)
            norms += [float(np.sum(W[s:s + chunk] * np.abs(v))) for v in vals]
        res.l1_low, res.l1_high = float(norms[0]), float(norms[1])
    return res
