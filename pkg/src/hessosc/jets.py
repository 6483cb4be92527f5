"""Truncated multivariate Taylor series ("jets").

A jet of order ``K`` in ``n`` variables is a float array whose last axis
holds the Taylor coefficients ``c_beta`` (``f(x0 + d) ~ sum c_beta d^beta``)
for all multi-indices with ``|beta| <= K`` in graded order.  Leading axes are
batch axes, so one call handles many expansion points at once.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import product

import numpy as np

from .polyphase import PolyPhase


@lru_cache(maxsize=None)
def _exponents(n: int, K: int) -> tuple:
    exps = [e for e in product(range(K + 1), repeat=n) if sum(e) <= K]
    exps.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
    return tuple(exps)


class JetAlgebra:
    """Arithmetic on order-``K`` jets in ``n`` variables."""

    def __init__(self, n: int, K: int):
        self.n = n
        self.K = K
        self.exps = _exponents(n, K)
        self.size = len(self.exps)
        self.index = {e: i for i, e in enumerate(self.exps)}
        self.degrees = np.array([sum(e) for e in self.exps])
        pi, pj, pk = [], [], []
        for i, a in enumerate(self.exps):
            for j, b in enumerate(self.exps):
                c = tuple(x + y for x, y in zip(a, b))
                if sum(c) <= K:
                    pi.append(i)
                    pj.append(j)
                    pk.append(self.index[c])
        order = np.argsort(pk, kind="stable")
        self._pi = np.array(pi)[order]
        self._pj = np.array(pj)[order]
        pk = np.array(pk)[order]
        self._starts = np.searchsorted(pk, np.arange(self.size))
        # derivative maps: d/dx_i sends coefficient of e + u_i to e, times (e_i + 1)
        self._dsrc = []
        self._dfac = []
        for i in range(n):
            src = np.zeros(self.size, dtype=int)
            fac = np.zeros(self.size)
            for k, e in enumerate(self.exps):
                up = list(e)
                up[i] += 1
                up = tuple(up)
                if up in self.index:
                    src[k] = self.index[up]
                    fac[k] = e[i] + 1
            self._dsrc.append(src)
            self._dfac.append(fac)

    # -- constructors -------------------------------------------------------
    def zeros(self, shape=()) -> np.ndarray:
        return np.zeros(tuple(shape) + (self.size,))

    def const(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        out = np.zeros(c.shape + (self.size,))
        out[..., 0] = c
        return out

    def variable(self, i: int, x0) -> np.ndarray:
        x0 = np.asarray(x0, dtype=float)
        out = self.const(x0)
        e = [0] * self.n
        e[i] = 1
        if self.K >= 1:
            out[..., self.index[tuple(e)]] = 1.0
        return out

    def from_poly(self, P: PolyPhase, x0) -> np.ndarray:
        """Jet of the polynomial ``P`` at points ``x0`` (shape ``(..., n)``)."""
        x0 = np.asarray(x0, dtype=float)
        shape = x0.shape[:-1]
        out = self.zeros(shape)
        maxdeg = [max((e[i] for e in P.support), default=0) for i in range(self.n)]
        pw = []
        for i in range(self.n):
            p = [np.ones(shape)]
            for _ in range(maxdeg[i]):
                p.append(p[-1] * x0[..., i])
            pw.append(p)
        for e, c in P.terms:
            c = float(c)
            for beta in product(*(range(min(k, self.K) + 1) for k in e)):
                if sum(beta) > self.K:
                    continue
                w = c
                for k, b in zip(e, beta):
                    w *= math.comb(k, b)
                val = w
                for i, (k, b) in enumerate(zip(e, beta)):
                    if k - b:
                        val = val * pw[i][k - b]
                out[..., self.index[beta]] += val
        return out

    # -- arithmetic ---------------------------------------------------------
    def mul(self, a, b) -> np.ndarray:
        a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
        prod = a[..., self._pi] * b[..., self._pj]
        return np.add.reduceat(prod, self._starts, axis=-1)

    def recip(self, a) -> np.ndarray:
        a = np.asarray(a, float)
        a0 = a[..., :1]
        if np.any(a0 == 0):
            raise ZeroDivisionError("jet with zero constant term")
        r = a / a0
        r[..., 0] = 0.0
        out = self.const(np.ones(a.shape[:-1]))
        term = out.copy()
        for _ in range(self.K):
            term = -self.mul(term, r)
            out = out + term
        return out / a0

    def div(self, a, b) -> np.ndarray:
        return self.mul(a, self.recip(b))

    def exp(self, a) -> np.ndarray:
        a = np.asarray(a, float)
        a0 = a[..., :1]
        r = a.copy()
        r[..., 0] = 0.0
        out = self.const(np.ones(a.shape[:-1]))
        term = out.copy()
        for m in range(1, self.K + 1):
            term = self.mul(term, r) / m
            out = out + term
        return out * np.exp(a0)

    def deriv(self, a, i: int) -> np.ndarray:
        """``d/dx_i``; the top-degree coefficients of the result are zero."""
        a = np.asarray(a, float)
        return a[..., self._dsrc[i]] * self._dfac[i]

    def scale_increment(self, a, s) -> np.ndarray:
        """Jet of ``d -> f(x0 + s d)`` from the jet of ``f`` at ``x0``."""
        s = np.asarray(s, float)[..., None]
        return a * s ** self.degrees

    def value(self, a) -> np.ndarray:
        return np.asarray(a)[..., 0]

    # -- matrices of jets (shape (..., m, m, size)) ---------------------------
    def matmul(self, A, B) -> np.ndarray:
        return self.mul(A[..., :, :, None, :], B[..., None, :, :, :]).sum(axis=-3)

    def matinv(self, A) -> np.ndarray:
        """Inverse of a matrix of jets via the terminating Neumann series."""
        A = np.asarray(A, float)
        m = A.shape[-2]
        if m == 1:
            return self.recip(A)
        if m == 2:
            a, b, c, d = A[..., 0, 0, :], A[..., 0, 1, :], A[..., 1, 0, :], A[..., 1, 1, :]
            r = self.recip(self.mul(a, d) - self.mul(b, c))
            return np.stack([np.stack([self.mul(d, r), -self.mul(b, r)], axis=-2),
                             np.stack([-self.mul(c, r), self.mul(a, r)], axis=-2)], axis=-3)
        A0 = A[..., 0]
        A0inv = np.linalg.inv(A0)
        Ninc = A.copy()
        Ninc[..., 0] = 0.0
        C0 = self.const(A0inv)
        T = -self.matmul(C0, Ninc)
        out = C0
        power = C0
        for _ in range(self.K):
            power = self.matmul(T, power)
            out = out + power
        return out

    def trace_mul(self, A, B) -> np.ndarray:
        """``tr(A B)`` for matrices of jets."""
        return self.mul(A, np.swapaxes(B, -2, -3)).sum(axis=(-2, -3))


def jet_derivatives(alg: JetAlgebra, a) -> dict:
    """Map multi-index -> partial derivative value (``beta! * c_beta``)."""
    return {
        e: float(np.asarray(a)[alg.index[e]]) * math.prod(math.factorial(k) for k in e)
        for e in alg.exps
    }
