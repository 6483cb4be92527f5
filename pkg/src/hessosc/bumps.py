"""Smooth compactly supported amplitudes (psi) and cutoffs (chi).

Both are built from ``exp(-1/(1 - y^2))`` so that values and all derivatives
have closed forms; derivatives are delivered as Taylor jets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .jets import JetAlgebra


def _bump1d(y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    m = np.abs(y) < 1
    out[m] = np.exp(-1.0 / (1.0 - y[m] ** 2))
    return out


def _bump1d_series(y0, K: int, scale: float = 1.0):
    """Taylor coefficients of ``d -> b(scale * (y0 + d))`` up to order ``K``.

    ``y0`` is an array; returns shape ``y0.shape + (K + 1,)``.
    """
    y0 = np.asarray(y0, dtype=float)
    alg = JetAlgebra(1, K)
    out = np.zeros(y0.shape + (K + 1,))
    m = np.abs(scale * y0) < 1
    if np.any(m):
        z = alg.variable(0, scale * y0[m])
        if K >= 1:
            z[..., 1] = scale
        w =alg.const(np.ones(z.shape[:-1])) - alg.mul(z, z)
        out[m] = alg.exp(-alg.recip(w))
    return out


@dataclass(frozen=True)
class BumpSpec:
    """Product bump amplitude ``psi(x) = prod_i b((x_i - c_i) / r)``.

    ``b(y) = exp(-1/(1-y^2))`` on ``|y| < 1``.  Support is the closed box
    ``center +- radius``.
    """

    dimension: int = 2
    radius: float = 0.5
    center: tuple = field(default=None)
    kind: str = "amplitude"

    def __post_init__(self):
        if self.center is None:
            object.__setattr__(self, "center", (0.0,) * self.dimension)
        if len(self.center) != self.dimension:
            raise ValueError("center dimension mismatch")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def support(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        out = np.ones(X.shape[:-1])
        for i, c in enumerate(self.center):
            out = out * _bump1d((X[..., i] - c) / self.radius)
        return out

    def jet(self, alg: JetAlgebra, x0):
        """Jet of psi at points ``x0`` (shape ``(..., n)``) in ``alg``."""
        x0 = np.asarray(x0, dtype=float)
        series = [
            _bump1d_series((x0[..., i] - c), alg.K, 1.0 / self.radius)
            for i, c in enumerate(self.center)
        ]
        out = alg.zeros(x0.shape[:-1])
        for k, e in enumerate(alg.exps):
            v = np.ones(x0.shape[:-1])
            for i, ei in enumerate(e):
                v = v * series[i][..., ei]
            out[..., k] = v
        return out

    def integral(self) -> float:
        from scipy.integrate import quad

        one = quad(lambda y: float(_bump1d(y)), -1, 1, epsabs=1e-14, epsrel=1e-13)[0]
        return (one * self.radius) ** self.dimension


@dataclass(frozen=True)
class CutoffSpec:
    """Cutoff ``chi(v) = exp(-1/(1-(2|v|-3)^2))`` on ``1 < |v| < 2``, else 0.

    ``sides`` selects the signed components: ``"both"`` (default), ``"positive"``
    or ``"negative"``.
    """

    sides: str = "both"
    kind: str = "cutoff"

    def __post_init__(self):
        if self.sides not in ("both", "positive", "negative"):
            raise ValueError(f"unknown sides {self.sides!r}")

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        out = _bump1d(2.0 * np.abs(v) - 3.0)
        if self.sides == "positive":
            out = np.where(v > 0, out, 0.0)
        elif self.sides == "negative":
            out = np.where(v < 0, out, 0.0)
        return out

    def derivatives(self, v, M: int):
        """Array ``(..., M+1)`` of ``chi^{(m)}(v)`` for ``m = 0..M``."""
        v = np.asarray(v, dtype=float)
        sgn = np.where(v < 0, -1.0, 1.0)
        # chi(v) = b(2 s v - 3) locally, with s = sign(v)
        ser = _bump1d_series(2.0 * np.abs(v) - 3.0, M)
        fact = np.cumprod(np.r_[1.0, np.arange(1, M + 1)])
        out = ser * fact * (2.0 * sgn[..., None]) ** np.arange(M + 1)
        if self.sides == "positive":
            out = np.where((v > 0)[..., None], out, 0.0)
        elif self.sides == "negative":
            out = np.where((v < 0)[..., None], out, 0.0)
        return out

    @property
    def support(self):
        return {"both": ((-2.0, -1.0), (1.0, 2.0)), "positive": ((1.0, 2.0),),
                "negative": ((-2.0, -1.0),)}[self.sides]


def partition_eta(y):
    """Dyadic partition bump on ``1/2 <= |y| <= 2`` with ``sum_j eta(2^j y) = 1``."""
    y = np.abs(np.asarray(y, dtype=float))
    return _smooth_step(y) - _smooth_step(2.0 * y)


def _smooth_step(y):
    """1 on ``|y| <= 1``, 0 on ``|y| >= 2``, smooth in between."""
    y = np.abs(np.asarray(y, dtype=float))
    t = np.clip(y - 1.0, 0.0, 1.0)
    a = np.where(t < 1, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    b = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    a = np.where(t >= 1, 0.0, a)
    b = np.where(t <= 0, 0.0, b)
    return a / (a + b)
