"""Explicit one-dimensional oscillatory bounds.

:class:`VdcInstance` packages a phase ``f`` (with ``f'`` and ``f''``), a
comparison function ``g`` and constants ``C``, ``K``, ``delta`` such that

    |f'' - g| <= C |f'|        and        delta <= |g| <= K delta    on I.

Under these hypotheses

    |int_I e^{i f/t} omega| <= (t/delta)^{1/2} (12 |omega|_inf + 4 |omega'|_1 + 2 C sqrt(K) |omega|_1)

for every ``t > 0``.  Constants are certified by dense sampling.  The module
also checks the interpolation inequality
``sup|F| <~ A^{1 - n/(2k)} B^{n/(2k)}`` for functions with
``|F| <= A t^{-n/2}`` and ``|F^(k)| <= B t^{-n/2}`` on ``(0, inf)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .oscquad import osc1d

SAMPLES_PER_UNIT = 4096
INFLATION = 1.1
TINY = 1e-300


class HypothesisError(ValueError):
    """The constants do not certify the hypotheses on the interval."""


def function_norms(omega, interval, samples: int = 4097, tol: float = 1e-8,
                   max_samples: int = 1 << 20):
    """``(sup|omega|, int|omega'|, int|omega|)`` by sampling, doubled until stable.

    ``int|omega'|`` is the total variation of the samples.
    """
    a, b = float(interval[0]), float(interval[1])
    n = samples
    prev = None
    while True:
        s = np.linspace(a, b, n)
        w = np.asarray(omega(s), float)
        l1 = float(np.trapezoid(np.abs(w), s))
        tv = float(np.sum(np.abs(np.diff(w))))
        sup = float(np.max(np.abs(w)))
        if prev is not None:
            if abs(l1 - prev[0]) <= tol * max(l1, TINY) and abs(tv - prev[1]) <= tol * max(tv, TINY):
                break
        if n >= max_samples:
            break
        prev = (l1, tv)
        n = 2 * n - 1
    return sup, tv, l1


@dataclass
class HypothesisReport:
    C_measured: float
    g_min: float
    g_max: float
    sign_constant: bool
    C_ok: bool
    delta_ok: bool
    K_ok: bool
    samples: int

    @property
    def ok(self) -> bool:
        return self.sign_constant and self.C_ok and self.delta_ok and self.K_ok

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["ok"] = self.ok
        return d


@dataclass
class VdcInstance:
    f: object
    f1: object
    f2: object
    g: object
    C: float
    K: float
    delta: float
    interval: tuple
    omega: object
    norms: tuple = field(default=None)

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.C < 0:
            raise ValueError("C must be nonnegative")
        a, b = self.interval
        if not b > a:
            raise ValueError("interval must be nondegenerate")
        if self.norms is None:
            self.norms = function_norms(self.omega, self.interval)

    @property
    def omega_sup(self):
        return self.norms[0]

    @property
    def omega_deriv_l1(self):
        return self.norms[1]

    @property
    def omega_l1(self):
        return self.norms[2]

    def _grid(self):
        a, b = self.interval
        m = max(int(math.ceil((b - a) * SAMPLES_PER_UNIT)) + 1, 1025)
        return np.linspace(a, b, m)

    def measure(self):
        """Measured ``(C, min|g|, max|g|, sign of g constant)`` on the sampling grid."""
        s = self._grid()
        f1 = np.asarray(self.f1(s), float)
        f2 = np.asarray(self.f2(s), float)
        g = np.asarray(self.g(s), float)
        num = np.abs(f2 - g)
        den = np.maximum(np.abs(f1), TINY)
        ratio = np.where(num == 0, 0.0, num / den)
        absg = np.abs(g)
        sign_const = bool(np.all(g > 0) or np.all(g < 0))
        return float(np.max(ratio)), float(absg.min()), float(absg.max()), sign_const, len(s)

    def check_hypotheses(self) -> HypothesisReport:
        Cm, gmin, gmax, sc, m = self.measure()
        return HypothesisReport(
            C_measured=Cm, g_min=gmin, g_max=gmax, sign_constant=sc,
            C_ok=Cm <= self.C, delta_ok=gmin >= self.delta, K_ok=gmax <= self.K * self.delta,
            samples=m,
        )

    @classmethod
    def certified(cls, f, f1, f2, g, interval, omega, delta: float | None = None,
                  C_floor: float = 0.0) -> "VdcInstance":
        """Build an instance with sampled constants inflated by 10%.

        ``delta`` defaults to the sampled ``min|g|``; ``K`` is
        ``1.1 max|g| / delta`` (at least 1); ``C`` is ``1.1`` times the
        sampled ratio ``|f'' - g| / |f'|``.
        """
        probe = cls(f, f1, f2, g, 0.0, 1.0, 1.0, tuple(interval), omega, norms=(0.0, 0.0, 0.0))
        Cm, gmin, gmax, sc, _ = probe.measure()
        if not sc or gmin <= 0:
            raise HypothesisError("g vanishes or changes sign on the interval")
        delta = gmin if delta is None else float(delta)
        if delta > gmin:
            raise HypothesisError(f"delta={delta:g} exceeds min|g|={gmin:g}")
        K = max(1.0, INFLATION * gmax / delta)
        C = max(C_floor, INFLATION * Cm)
        return cls(f, f1, f2, g, C, K, delta, tuple(interval), omega)


def estprop_rhs(inst: VdcInstance, t: float) -> float:
    """``(t/delta)^{1/2} (12 |omega|_inf + 4 |omega'|_1 + 2 C sqrt(K) |omega|_1)``."""
    if t <= 0:
        raise ValueError("t must be positive")
    return math.sqrt(t / inst.delta) * (
        12 * inst.omega_sup + 4 * inst.omega_deriv_l1 + 2 * inst.C * math.sqrt(inst.K) * inst.omega_l1
    )


@dataclass
class VerifyReport:
    hypotheses: HypothesisReport
    rows: list
    violations: int
    max_ratio: float

    def to_dict(self) -> dict:
        return {"hypotheses": self.hypotheses.to_dict(), "rows": self.rows,
                "violations": self.violations, "max_ratio": self.max_ratio}


def estprop_verify(inst: VdcInstance, t_grid, tol: float = 1e-10) -> VerifyReport:
    """Evaluate both sides on ``t_grid``.

    Rows carry ``t, lhs, rhs, ratio`` and ``trivial_regime`` (where
    ``2 C sqrt(K t / delta) > 1``, so the bound ``|omega|_1`` is already
    the stronger one).  Inequality checks are skipped when the hypotheses
    fail to certify; that outcome is reported, not counted as a violation.
    """
    hyp = inst.check_hypotheses()
    rows = []
    violations = 0
    max_ratio = 0.0
    for t in t_grid:
        t = float(t)
        val = osc1d(inst.f, inst.omega, t, inst.interval, fprime=inst.f1, tol=tol)
        lhs = abs(val.value)
        rhs = estprop_rhs(inst, t)
        ratio = lhs / rhs if rhs > 0 else math.inf
        trivial = 2 * inst.C * math.sqrt(inst.K * t / inst.delta) > 1
        violated = hyp.ok and lhs - val.est_error > rhs
        violations += int(violated)
        max_ratio = max(max_ratio, ratio)
        rows.append({"t": t, "lhs": lhs, "rhs": rhs, "ratio": ratio, "est_error": val.est_error,
                     "trivial_regime": trivial, "violated": violated})
    return VerifyReport(hyp, rows, violations, max_ratio)


def eset_structure(inst: VdcInstance, eps: float, slack: float = 1e-3) -> dict:
    """Sampled structure of ``E_eps = {s in I : |f'(s)| <= eps}``.

    Returns ``connected``, ``length`` and two reference bounds:
    ``2 eps / delta`` and ``2 eps / (delta - C eps)`` (the latter follows from
    ``|f''| >= delta - C eps`` on ``E_eps``).  ``connected`` is ``None`` when
    the hypotheses do not certify or ``eps >= delta / C``.
    """
    hyp = inst.check_hypotheses()
    s = inst._grid()
    h = s[1] - s[0]
    inside = np.abs(np.asarray(inst.f1(s), float)) <= eps
    runs = int(np.sum(np.diff(inside.astype(int)) == 1) + int(inside[0]))
    length = float(np.sum(inside) * h)
    regime = inst.C == 0 or eps < inst.delta / inst.C
    bound_nominal = 2 * eps / inst.delta
    denom = inst.delta - inst.C * eps
    bound_strict = 2 * eps / denom if denom > 0 else math.inf
    out = {
        "eps": eps,
        "hypotheses_ok": hyp.ok,
        "regime": bool(regime),
        "runs": runs,
        "length": length,
        "bound_nominal": bound_nominal,
        "bound_strict": bound_strict,
        "within_nominal": length <= bound_nominal * (1 + slack) + 2 * h,
        "within_strict": length <= bound_strict * (1 + slack) + 2 * h,
    }
    if not hyp.ok:
        out["connected"] = None
        out["reason"] = "hypotheses not certified"
    elif not regime:
        out["connected"] = None
        out["reason"] = "eps outside the connectivity regime"
    else:
        out["connected"] = runs <= 1
    return out


# -- interpolation inequality ----------------------------------------------------

@dataclass
class InterpMember:
    """A test function ``F`` with its ``k``-th derivative and nominal constants."""

    F: object
    Fk: object
    A: float
    B: float
    label: str = ""


def envelope_member(A: float, M: float) -> InterpMember:
    """``F = A / (t + A/M)``: ``|F| <= A/t``, ``sup F = M`` (``n = 2``, ``k = 2``)."""
    c = A / M
    return InterpMember(
        F=lambda t: A / (t + c),
        Fk=lambda t: 2 * A / (t + c) ** 3,
        A=A,
        B=8 * A / (27 * c * c),
        label=f"envelope A={A:g} M={M:g}",
    )


@lru_cache(maxsize=None)
def _osc_profile_sup() -> float:
    # sup over u of |-sin u - 2 cos u / u + 2 sin u / u^2|, attained near u = 4.21
    h = lambda u: -abs(-math.sin(u) - 2 * math.cos(u) / u + 2 * math.sin(u) / u**2)
    res = minimize_scalar(h, bounds=(3.5, 5.0), method="bounded", options={"xatol": 1e-12})
    return -float(res.fun)


def oscillator_member(A: float, B: float) -> InterpMember:
    """``F = A sin(w t) / t`` (``n = 2``, ``k = 2``).

    ``t F''(t) = A w^2 h(w t)`` with ``sup|h| ~ 1.0063``; ``w`` is chosen so
    that ``sup t |F''| = B``.
    """
    w = math.sqrt(B / (A * _osc_profile_sup()))

    def F(t):
        return A * np.sin(w * t) / t

    def F2(t):
        s, c = np.sin(w * t), np.cos(w * t)
        return A * (-w * w * s / t - 2 * w * c / t**2 + 2 * s / t**3)

    return InterpMember(F=F, Fk=F2, A=A, B=B, label=f"oscillator A={A:g} B={B:g}")


def rescaled_member(m: InterpMember, c: float, n: int = 2, k: int = 2) -> InterpMember:
    """``F(c t)``: constants become ``A c^{-n/2}`` and ``B c^{k - n/2}``."""
    return InterpMember(
        F=lambda t: m.F(c * t),
        Fk=lambda t: c**k * m.Fk(c * t),
        A=m.A * c ** (-n / 2),
        B=m.B * c ** (k - n / 2),
        label=f"{m.label} rescaled by {c:g}",
    )


def sup_interp_check(family, n: int = 2, k: int = 2, t_min: float = 1e-8, t_max: float = 1e8,
                     points: int = 40001, bound: float = 50.0) -> dict:
    """Implied constants ``sup|F| / (A^{1-n/(2k)} B^{n/(2k)})`` over a log grid.

    ``A`` and ``B`` are the sampled ``sup |F| t^{n/2}`` and
    ``sup |F^(k)| t^{n/2}``; the nominal constants are reported alongside.
    """
    if 2 * k <= n:
        raise ValueError("need 2k > n")
    r = n / (2 * k)
    t = np.logspace(math.log10(t_min), math.log10(t_max), points)
    rows = []
    for m in family:
        F = np.abs(np.asarray(m.F(t), float))
        Fk = np.abs(np.asarray(m.Fk(t), float))
        A_emp = float(np.max(F * t ** (n / 2)))
        B_emp = float(np.max(Fk * t ** (n / 2)))
        sup = float(np.max(F))
        const = sup / (A_emp ** (1 - r) * B_emp**r)
        const_nominal = sup / (m.A ** (1 - r) * m.B**r)
        rows.append({"label": m.label, "sup": sup, "A": A_emp, "B": B_emp,
                     "A_nominal": m.A, "B_nominal": m.B,
                     "constant": const, "constant_nominal": const_nominal,
                     "nominal_bounds_hold": A_emp <= m.A * (1 + 1e-9) and B_emp <= m.B * (1 + 1e-9)})
    worst = max(row["constant"] for row in rows) if rows else 0.0
    return {"n": n, "k": k, "rows": rows, "max_constant": worst, "bounded": worst <= bound}


# -- reference families ------------------------------------------------------------

def bump_weight(s):
    """``e * exp(-1/(1-s^2))`` on ``|s| < 1``: a bump with maximum 1."""
    s = np.asarray(s, float)
    out = np.zeros_like(s)
    m = np.abs(s) < 1
    out[m] = math.e * np.exp(-1.0 / (1.0 - s[m] ** 2))
    return out


def fresnel_instance(omega=bump_weight, interval=(-1.0, 1.0)) -> VdcInstance:
    """``f = s^2/2``, ``g = 1``: ``C = 0``, ``delta = K = 1``."""
    one = lambda s: np.ones_like(np.asarray(s, float))
    return VdcInstance(lambda s: np.asarray(s) ** 2 / 2, lambda s: np.asarray(s, float), one, one,
                       0.0, 1.0, 1.0, tuple(interval), omega)


def delta_scaling_instance(delta: float, omega=bump_weight, interval=(-1.0, 1.0)) -> VdcInstance:
    """``f = delta s^2/2``, ``g = delta``."""
    d = float(delta)
    const = lambda s: np.full_like(np.asarray(s, float), d)
    return VdcInstance(lambda s: d * np.asarray(s) ** 2 / 2, lambda s: d * np.asarray(s, float),
                       const, const, 0.0, 1.0, d, tuple(interval), omega)


def cubic_instance(alpha: float, omega=bump_weight, interval=(-1.0, 1.0)) -> VdcInstance:
    """``f = s^2/2 + alpha s^3`` with ``g = 1`` and sampled (certified) constants."""
    a = float(alpha)
    return VdcInstance.certified(
        lambda s: np.asarray(s) ** 2 / 2 + a * np.asarray(s) ** 3,
        lambda s: np.asarray(s) + 3 * a * np.asarray(s) ** 2,
        lambda s: 1 + 6 * a * np.asarray(s, float),
        lambda s: np.ones_like(np.asarray(s, float)),
        interval, omega,
    )
