"""Panelised Gauss-Legendre quadrature for oscillatory integrals.

Panels are planned so that the phase changes by at most ``budget`` radians
across each one; for Hessian-determinant cutoffs, panels on which an
interval enclosure of ``det Hess`` misses ``eps * [1, 2]`` are culled and the
remaining panels are refined until the cutoff itself is resolved.  Accuracy
is controlled by doubling the per-panel Gauss-Legendre order until two
successive values agree to ``tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .bumps import BumpSpec, CutoffSpec
from .polyphase import PolyPhase

LAMBDA_CAP_2D = 2.0**12
LAMBDA_CAP_1D = 2.0**16
MAX_NODES = 6_000_000
CHUNK = 262_144


class QuadratureBudgetError(RuntimeError):
    """The requested accuracy needs more nodes than the configured caps allow."""


@dataclass(frozen=True)
class IntegralValue:
    value: complex
    est_error: float
    nodes_used: int

    def __abs__(self):
        return abs(self.value)

    def to_dict(self) -> dict:
        return {
            "re": self.value.real,
            "im": self.value.imag,
            "abs": abs(self.value),
            "est_error": self.est_error,
            "nodes_used": self.nodes_used,
        }


@dataclass(frozen=True)
class Amplitude:
    """Generic amplitude: a vectorised callable with a support box."""

    fn: object
    support: tuple
    resolution: float

    def __call__(self, X):
        return self.fn(X)


def _amp_resolution(psi) -> float:
    if isinstance(psi, BumpSpec):
        return psi.radius
    return getattr(psi, "resolution", 0.25)


@lru_cache(maxsize=None)
def _gl(order: int):
    t, w = leggauss(order)
    return t, w


@dataclass
class QuadPlan:
    """Panels ``lo[k] <= x <= hi[k]`` covering the live part of the domain."""

    box: tuple
    lo: np.ndarray
    hi: np.ndarray
    order: int = 12
    budget: float = math.pi

    @property
    def n_panels(self) -> int:
        return len(self.lo)

    def nodes(self, order: int | None = None):
        """Tensor Gauss-Legendre nodes ``(N, d)`` and weights ``(N,)``."""
        q = order or self.order
        t, w = _gl(q)
        d = self.lo.shape[1]
        half = 0.5 * (self.hi - self.lo)
        mid = 0.5 * (self.hi + self.lo)
        if d == 1:
            X = mid[:, None, 0] + half[:, None, 0] * t[None, :]
            W = half[:, 0:1] * w[None, :]
            return X.reshape(-1, 1), W.reshape(-1)
        X1 = mid[:, None, None, 0] + half[:, None, None, 0] * t[None, :, None]
        X2 = mid[:, None, None, 1] + half[:, None, None, 1] * t[None, None, :]
        X = np.stack(np.broadcast_arrays(X1, X2), axis=-1)
        W = (half[:, 0] * half[:, 1])[:, None, None] * w[None, :, None] * w[None, None, :]
        return X.reshape(-1, 2), W.reshape(-1)


def _sup_abs(lo, hi):
    return np.maximum(np.abs(lo), np.abs(hi))


def _mean_value_enclosure(P, grad, lo, hi):
    """Centered-form enclosure ``P(c) + sum grad_i(box) [-w_i/2, w_i/2]``."""
    c = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pc = P(c)
    rad = np.zeros(len(lo))
    for i, g in enumerate(grad):
        gl, gh = g.interval_bound(lo, hi)
        rad += _sup_abs(gl, gh) * half[:, i]
    return pc - rad, pc + rad


def plan_panels(
    phase: PolyPhase,
    lam: float,
    box,
    xi_box=None,
    cutoff: PolyPhase | None = None,
    eps: float | None = None,
    chi: CutoffSpec | None = None,
    amp_resolution: float = 0.5,
    budget: float = math.pi,
    chi_resolution: float = 0.25,
    order: int = 12,
    max_nodes: int = MAX_NODES,
) -> QuadPlan:
    """Adaptive anisotropic panel plan for ``exp(i lam (phase + xi.x))``.

    ``xi_box`` is ``((xi1_lo, xi1_hi), (xi2_lo, xi2_hi))``: the plan is valid
    for every ``xi`` inside it.  With ``cutoff`` (the polynomial ``u``) and
    ``eps``, panels where ``chi(u / eps)`` vanishes identically are dropped
    and live panels are split until ``u`` varies by at most
    ``chi_resolution * eps`` across each.
    """
    box = tuple((float(a), float(b)) for a, b in box)
    d = len(box)
    if xi_box is None:
        xi_box = ((0.0, 0.0),) * d
    xi_lo = np.array([a for a, _ in xi_box], dtype=float)
    xi_hi = np.array([b for _, b in xi_box], dtype=float)
    grad = phase.gradient()
    ugrad = cutoff.gradient() if cutoff is not None else None
    chi = chi or CutoffSpec()
    amp_res = max(0.5 * amp_resolution, 1e-12)
    max_panels = max(1, max_nodes // order**d)

    lo = np.array([[a for a, _ in box]])
    hi = np.array([[b for _, b in box]])
    done_lo, done_hi = [], []
    n_done = 0
    while len(lo):
        keep = np.ones(len(lo), dtype=bool)
        crit = np.zeros((len(lo), d))
        w = hi - lo
        for i, g in enumerate(grad):
            gl, gh = g.interval_bound(lo, hi)
            G = _sup_abs(gl + xi_lo[i], gh + xi_hi[i])
            crit[:, i] = np.maximum(crit[:, i], lam * G * w[:, i] / budget)
        crit = np.maximum(crit, w / amp_res)
        if cutoff is not None:
            nl, nh = cutoff.interval_bound(lo, hi)
            ml, mh = _mean_value_enclosure(cutoff, ugrad, lo, hi)
            ul, uh = np.maximum(nl, ml), np.minimum(nh, mh)
            live = np.zeros(len(lo), dtype=bool)
            for a, b in chi.support:
                live |= (uh > a * eps) & (ul < b * eps)
            keep &= live
            for i, g in enumerate(ugrad):
                gl, gh = g.interval_bound(lo, hi)
                crit[:, i] = np.maximum(crit[:, i], _sup_abs(gl, gh) * w[:, i] / (chi_resolution * eps))
        worst = crit.max(axis=1)
        fin = keep & (worst <= 1.0)
        done_lo.append(lo[fin])
        done_hi.append(hi[fin])
        n_done += int(fin.sum())
        split = keep & ~fin
        lo, hi, crit = lo[split], hi[split], crit[split]
        if n_done + 2 * len(lo) > max_panels:
            raise QuadratureBudgetError(
                f"panel plan exceeds node cap {max_nodes} (lambda={lam:g}, eps={eps})"
            )
        if not len(lo):
            break
        axis = np.argmax(crit, axis=1)
        mid = 0.5 * (lo[np.arange(len(lo)), axis] + hi[np.arange(len(lo)), axis])
        lo2, hi2 = lo.copy(), hi.copy()
        hi1 = hi.copy()
        hi1[np.arange(len(lo)), axis] = mid
        lo2[np.arange(len(lo)), axis] = mid
        lo = np.concatenate([lo, lo2])
        hi = np.concatenate([hi1, hi2])
    lo = np.concatenate(done_lo) if done_lo else np.zeros((0, d))
    hi = np.concatenate(done_hi) if done_hi else np.zeros((0, d))
    order_idx = np.lexsort(tuple(lo[:, i] for i in reversed(range(d))))
    return QuadPlan(box=box, lo=lo[order_idx], hi=hi[order_idx], order=order, budget=budget)


def _pairwise_sum(v):
    """Deterministic sum independent of chunking (numpy's pairwise summation)."""
    return np.sum(v)


class CutoffIntegrator:
    """Prepared evaluator for ``int exp(i lam (Phi + xi.x)) chi(u/eps) psi dx``.

    The panel plan and the ``xi``-independent part of the integrand are
    built once; :meth:`values` then evaluates many ``xi`` cheaply.
    """

    def __init__(self, phase: PolyPhase, lam: float, eps: float | None = None,
                 psi=None, chi: CutoffSpec | None = None, xi_box=None,
                 cutoff: PolyPhase | None = None, use_cutoff: bool = True,
                 order: int = 12, budget: float = math.pi, chi_resolution: float = 0.25,
                 max_nodes: int = MAX_NODES, lambda_cap: float = LAMBDA_CAP_2D,
                 box=None):
        if lam <= 0:
            raise ValueError("lambda must be positive")
        if lam > lambda_cap:
            raise QuadratureBudgetError(f"lambda={lam:g} exceeds the 2-D cap {lambda_cap:g}")
        if use_cutoff and (eps is None or eps <= 0):
            raise ValueError("eps must be positive")
        self.phase = phase
        self.lam = float(lam)
        self.eps = eps
        self.psi = psi if psi is not None else BumpSpec(phase.dimension)
        self.chi = chi or CutoffSpec()
        self.use_cutoff = use_cutoff
        self.u = (cutoff if cutoff is not None else phase.hessian_det()) if use_cutoff else None
        self.order = order
        self.max_nodes = max_nodes
        lo, hi = self.psi.support
        self.box = box or tuple(zip(np.atleast_1d(lo), np.atleast_1d(hi)))
        self.xi_box = xi_box
        self.plan = plan_panels(
            phase, self.lam, self.box, xi_box=xi_box, cutoff=self.u, eps=eps, chi=self.chi,
            amp_resolution=_amp_resolution(self.psi), budget=budget,
            chi_resolution=chi_resolution, order=order, max_nodes=max_nodes,
        )
        self._cache = {}

    def _prepared(self, order):
        if order not in self._cache:
            if self.plan.n_panels * order**self.phase.dimension > 4 * self.max_nodes:
                raise QuadratureBudgetError(f"order {order} exceeds node cap")
            X, W = self.plan.nodes(order)
            amp = W * self.psi(X) if len(X) else W
            if self.use_cutoff and len(X):
                amp = amp * self.chi(self.u(X) / self.eps)
            live = amp != 0
            X, amp = X[live], amp[live]
            base = amp * np.exp(1j * self.lam * self.phase(X))
            self._cache = {k: v for k, v in self._cache.items() if k < order}
            self._cache[order] = (X, base, np.abs(amp))
        return self._cache[order]

    def nodes_used(self, order=None) -> int:
        return len(self._prepared(order or self.order)[0])

    def values(self, xis, order=None) -> np.ndarray:
        """Integral values for each row of ``xis`` (shape ``(k, d)``)."""
        X, base, _ = self._prepared(order or self.order)
        xis = np.atleast_2d(np.asarray(xis, dtype=float))
        out = np.zeros(len(xis), dtype=complex)
        for s in range(0, len(X), CHUNK):
            Xs = X[s:s + CHUNK]
            E = np.exp(1j * self.lam * (xis @ Xs.T))
            out += E @ base[s:s + CHUNK]
        return out

    def value_grid(self, xi1, xi2, order=None) -> np.ndarray:
        """Values on the tensor grid ``xi1 x xi2`` (2-D only), shape ``(len(xi1), len(xi2))``."""
        X, base, _ = self._prepared(order or self.order)
        xi1 = np.asarray(xi1, float)
        xi2 = np.asarray(xi2, float)
        out = np.zeros((len(xi1), len(xi2)), dtype=complex)
        for s in range(0, len(X), CHUNK):
            Xs = X[s:s + CHUNK]
            E1 = np.exp(1j * self.lam * np.outer(xi1, Xs[:, 0])) * base[s:s + CHUNK]
            E2 = np.exp(1j * self.lam * np.outer(xi2, Xs[:, 1]))
            out += E1 @ E2.T
        return out

    def integrate(self, xi=None, tol: float = 1e-8, max_passes: int = 6,
                  abs_floor: float = 1e-300) -> IntegralValue:
        xi = np.zeros(self.phase.dimension) if xi is None else np.asarray(xi, float)
        order = self.order
        prev = self.values(xi[None, :], order)[0]
        nodes = self.nodes_used(order)
        for _ in range(max_passes):
            order *= 2
            try:
                cur = self.values(xi[None, :], order)[0]
            except (QuadratureBudgetError, MemoryError) as err:
                raise QuadratureBudgetError(
                    f"no convergence to tol={tol:g} within node cap; last delta unknown"
                ) from err
            nodes = self.nodes_used(order)
            delta = abs(cur - prev)
            if delta <= tol * abs(cur) or delta <= abs_floor:
                return IntegralValue(complex(cur), float(delta), nodes)
            prev = cur
        raise QuadratureBudgetError(f"no convergence to tol={tol:g} after {max_passes} passes")

    def trivial_bound(self) -> float:
        """``int |chi(u/eps) psi|`` with the same nodes."""
        _, _, a = self._prepared(self.order * 2)
        return float(np.sum(a))


def osc2d(phase: PolyPhase, xi, lam: float, chi: CutoffSpec | None, eps: float, psi=None,
          tol: float = 1e-8, **kw) -> IntegralValue:
    """``int exp(i lam (Phi + xi.x)) chi(det Hess Phi / eps) psi dx``."""
    psi = psi if psi is not None else BumpSpec(phase.dimension)
    xi = np.asarray(xi if xi is not None else np.zeros(phase.dimension), float)
    if eps is not None and _cutoff_empty(phase.hessian_det(), psi, eps, chi):
        return IntegralValue(0j, 0.0, 0)
    xb = tuple((float(v), float(v)) for v in xi)
    integ = CutoffIntegrator(phase, lam, eps, psi, chi, xi_box=xb, **kw)
    if integ.plan.n_panels == 0:
        return IntegralValue(0j, 0.0, 0)
    return integ.integrate(xi, tol=tol)


def _cutoff_empty(u, psi, eps, chi):
    lo, hi = psi.support
    ul, uh = u.interval_bound(np.atleast_1d(lo)[None, :], np.atleast_1d(hi)[None, :])
    chi = chi or CutoffSpec()
    return not any((uh[0] > a * eps) and (ul[0] < b * eps) for a, b in chi.support)


def nondeg_integral(phase: PolyPhase, psi, p, t: float, tol: float = 1e-8,
                    density: PolyPhase | None = None, **kw) -> IntegralValue:
    """``t^{-n/2} int exp(i (Phi - Phi(p)) / t) psi dmu`` for ``n`` in ``{1, 2}``."""
    if t <= 0:
        raise ValueError("t must be positive")
    n = phase.dimension
    shifted = phase - phase.eval(list(p), "rational")
    amp = psi
    if density is not None:
        amp = Amplitude(lambda X: psi(X) * density(X), psi.support, _amp_resolution(psi))
    if n == 1:
        lo, hi = psi.support
        f = lambda s: shifted(np.asarray(s)[:, None])
        fp = lambda s: shifted.diff(0)(np.asarray(s)[:, None])
        w = lambda s: amp(np.asarray(s)[:, None])
        res = osc1d(f, w, t, (float(np.ravel(lo)[0]), float(np.ravel(hi)[0])), fprime=fp, tol=tol)
    elif n == 2:
        lam = 1.0 / t
        integ = CutoffIntegrator(shifted, lam, psi=amp, use_cutoff=False,
                                 lambda_cap=kw.pop("lambda_cap", max(LAMBDA_CAP_2D, lam)), **kw)
        res = integ.integrate(tol=tol)
    else:
        raise ValueError("quadrature is implemented for n <= 2")
    scale = t ** (-n / 2)
    return IntegralValue(res.value * scale, res.est_error * scale, res.nodes_used)


def osc1d(f, omega, t: float, interval, fprime=None, tol: float = 1e-8, order: int = 12,
          budget: float = math.pi, resolution: float | None = None,
          max_nodes: int = 1 << 26, lambda_cap: float = LAMBDA_CAP_1D,
          max_passes: int = 6, coarse: int = 1024, sub: int = 16) -> IntegralValue:
    """``int_I exp(i f(s) / t) omega(s) ds`` with vectorised ``f`` and ``omega``.

    The interval is cut into ``coarse`` cells; in each cell the rate
    ``|f'|`` is sampled at ``sub + 1`` points (``fprime`` if given,
    otherwise difference quotients of ``f``) and the cell is split into
    equal panels over which the phase moves by at most ``budget``.
    Evaluation runs over fixed panel chunks, so the summation order does
    not depend on memory limits.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if 1.0 / t > lambda_cap:
        raise QuadratureBudgetError(f"1/t={1.0 / t:g} exceeds the 1-D cap {lambda_cap:g}")
    a, b = float(interval[0]), float(interval[1])
    if b <= a:
        return IntegralValue(0j, 0.0, 0)
    length = b - a
    resolution = resolution or length / 16
    cells = np.linspace(a, b, coarse + 1)
    h = length / coarse
    s = (cells[:-1, None] + h * np.linspace(0.0, 1.0, sub + 1)[None, :]).ravel()
    if fprime is not None:
        rate = np.abs(np.asarray(fprime(s), float)).reshape(coarse, sub + 1).max(axis=1)
    else:
        fs = np.asarray(f(s), float).reshape(coarse, sub + 1)
        rate = np.abs(np.diff(fs, axis=1)).max(axis=1) * sub / h
    need = np.maximum(rate * h * 1.25 / (t * budget), h / resolution)
    per_cell = np.maximum(np.ceil(need), 1).astype(np.int64)
    n_panels = int(per_cell.sum())
    if n_panels * order > max_nodes:
        raise QuadratureBudgetError("1-D plan exceeds node cap")
    # panel k of cell c spans cells[c] + h [k, k+1] / per_cell[c]
    cell_of = np.repeat(np.arange(coarse), per_cell)
    first = np.concatenate([[0], np.cumsum(per_cell)[:-1]])
    k = np.arange(n_panels) - first[cell_of]
    width = h / per_cell[cell_of]
    lo = cells[cell_of] + k * width
    chunk = max(1, CHUNK // order)

    def val(q):
        x, w = _gl(q)
        total = 0j
        for c0 in range(0, n_panels, chunk):
            hw = 0.5 * width[c0:c0 + chunk]
            mid = lo[c0:c0 + chunk] + hw
            X = (mid[:, None] + hw[:, None] * x[None, :]).ravel()
            W = (hw[:, None] * w[None, :]).ravel()
            total += complex(np.sum(W * omega(X) * np.exp(1j * f(X) / t)))
        return total, n_panels * q

    prev, nodes = val(order)
    q = order
    for _ in range(max_passes):
        q *= 2
        if n_panels * q > 4 * max_nodes:
            break
        cur, nodes = val(q)
        delta = abs(cur - prev)
        if delta <= tol * abs(cur) or delta <= 1e-300:
            return IntegralValue(cur, float(delta), nodes)
        prev = cur
    raise QuadratureBudgetError(f"osc1d: no convergence to tol={tol:g}")
