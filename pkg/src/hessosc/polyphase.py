"""Exact multivariate polynomial phases.

Coefficients are :class:`fractions.Fraction`; exponent vectors are tuples of
non-negative ints.  All symbolic work (derivatives, Hessian determinants,
shifts and dyadic rescalings) is exact.  Floating point only enters through
:meth:`PolyPhase.__call__` (vectorised numpy evaluation) and the interval
range bounds used for quadrature culling.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from numbers import Rational
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Monomial",
    "PolyPhase",
    "PhaseFormatError",
    "eval_poly",
    "gradient",
    "hessian_det",
    "load_phase",
    "dump_phase",
]


class PhaseFormatError(ValueError):
    """Raised for malformed phase files; carries line/column when known."""

    def __init__(self, msg, lineno=None, colno=None):
        if lineno is not None:
            msg = f"{msg} (line {lineno}, column {colno})"
        super().__init__(msg)
        self.lineno = lineno
        self.colno = colno


def _frac(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, float):
        # exact binary value of the float
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    if isinstance(c, np.integer):
        return Fraction(int(c))
    if isinstance(c, np.floating):
        return Fraction(float(c))
    raise TypeError(f"cannot convert {c!r} to an exact rational")


def _grlex_key(exp):
    return (sum(exp), exp)


@dataclass(frozen=True)
class Monomial:
    exponents: tuple
    coefficient: Fraction

    def __post_init__(self):
        if any(int(k) != k or k < 0 for k in self.exponents):
            raise ValueError(f"exponents must be non-negative ints: {self.exponents}")
        if self.coefficient == 0:
            raise ValueError("zero monomials are never stored")

    @property
    def degree(self) -> int:
        return sum(self.exponents)


class PolyPhase:
    """Immutable polynomial in ``dimension`` variables with rational coefficients.

    >>> x1, x2 = PolyPhase.variables(2)
    >>> P = (x2 + x1**2) ** 2
    >>> P.hessian_det() == 8 * (x2 + x1**2)
    True
    """

    __slots__ = ("_n", "_terms", "_hash")

    def __init__(self, dimension: int, terms: Mapping[tuple, object] | Iterable = ()):
        n = int(dimension)
        if n < 1:
            raise ValueError("dimension must be >= 1")
        acc: dict = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for item in items:
            if isinstance(item, Monomial):
                exp, c = item.exponents, item.coefficient
            else:
                exp, c = item
            exp = tuple(int(k) for k in exp)
            if len(exp) != n:
                raise ValueError(f"exponent {exp} does not match dimension {n}")
            if any(k < 0 for k in exp):
                raise ValueError(f"negative exponent in {exp}")
            acc[exp] = acc.get(exp, Fraction(0)) + _frac(c)
        self._n = n
        self._terms = tuple(
            sorted(((e, c) for e, c in acc.items() if c != 0), key=lambda t: _grlex_key(t[0]))
        )
        self._hash = None

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, c, dimension: int) -> "PolyPhase":
        return cls(dimension, {(0,) * dimension: c})

    @classmethod
    def variable(cls, i: int, dimension: int) -> "PolyPhase":
        exp = [0] * dimension
        exp[i] = 1
        return cls(dimension, {tuple(exp): 1})

    @classmethod
    def variables(cls, dimension: int):
        return tuple(cls.variable(i, dimension) for i in range(dimension))

    @classmethod
    def linear(cls, coeffs: Sequence) -> "PolyPhase":
        n = len(coeffs)
        return cls(n, {tuple(int(j == i) for j in range(n)): c for i, c in enumerate(coeffs)})

    @classmethod
    def quadratic_form(cls, H) -> "PolyPhase":
        """``0.5 * x^T H x`` for a symmetric matrix ``H`` (entries made exact)."""
        n = len(H)
        terms = {}
        for i in range(n):
            for j in range(n):
                exp = [0] * n
                exp[i] += 1
                exp[j] += 1
                terms.setdefault(tuple(exp), Fraction(0))
                terms[tuple(exp)] += _frac(H[i][j]) / 2
        return cls(n, terms)

    # -- basic protocol -----------------------------------------------------
    @property
    def dimension(self) -> int:
        return self._n

    @property
    def terms(self) -> tuple:
        """Tuple of ``(exponent, Fraction)`` pairs in graded-lex order."""
        return self._terms

    @property
    def monomials(self) -> tuple:
        return tuple(Monomial(e, c) for e, c in self._terms)

    @property
    def support(self) -> tuple:
        return tuple(e for e, _ in self._terms)

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self._terms), default=-1)

    def coefficient(self, exp) -> Fraction:
        for e, c in self._terms:
            if e == tuple(exp):
                return c
        return Fraction(0)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e, _ in self._terms)

    def __eq__(self, other):
        if isinstance(other, PolyPhase):
            return self._n == other._n and self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self == PolyPhase.constant(other, self._n)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._n, self._terms))
        return self._hash

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for e, c in self._terms:
            mono = "*".join(
                f"x{i + 1}" if k == 1 else f"x{i + 1}^{k}" for i, k in enumerate(e) if k
            )
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "PolyPhase":
        if isinstance(other, PolyPhase):
            if other._n != self._n:
                raise ValueError("dimension mismatch")
            return other
        return PolyPhase.constant(_frac(other), self._n)

    def __add__(self, other):
        other = self._coerce(other)
        return PolyPhase(self._n, list(self._terms) + list(other._terms))

    __radd__ = __add__

    def __neg__(self):
        return PolyPhase(self._n, [(e, -c) for e, c in self._terms])

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, PolyPhase):
            c = _frac(other)
            return PolyPhase(self._n, [(e, c * a) for e, a in self._terms])
        other = self._coerce(other)
        acc: dict = {}
        for e1, c1 in self._terms:
            for e2, c2 in other._terms:
                e = tuple(a + b for a, b in zip(e1, e2))
                acc[e] = acc.get(e, Fraction(0)) + c1 * c2
        return PolyPhase(self._n, acc)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (Fraction(1) / _frac(other))

    def __pow__(self, k: int):
        if int(k) != k or k < 0:
            raise ValueError("only non-negative integer powers")
        out = PolyPhase.constant(1, self._n)
        base = self
        k = int(k)
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- evaluation ---------------------------------------------------------
    def eval(self, x, mode: str = "rational"):
        """Evaluate at a single point.

        ``mode="rational"`` is exact (``x`` converted to Fractions);
        ``mode="binary64"`` sums float products with :func:`math.fsum`.
        """
        if len(x) != self._n:
            raise ValueError(f"point has dimension {len(x)}, polynomial has {self._n}")
        if mode == "rational":
            xs = [_frac(v) for v in x]
            total = Fraction(0)
            for e, c in self._terms:
                t = c
                for xi, k in zip(xs, e):
                    if k:
                        t *= xi**k
                total += t
            return total
        if mode == "binary64":
            xs = [float(v) for v in x]
            vals = []
            for e, c in self._terms:
                t = float(c)
                for xi, k in zip(xs, e):
                    if k:
                        t *= xi**k
                vals.append(t)
            return math.fsum(vals)
        raise ValueError(f"unknown mode {mode!r}")

    def __call__(self, X):
        """Vectorised float evaluation on an array of shape ``(..., n)``."""
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self._n:
            raise ValueError(f"points have dimension {X.shape[-1]}, polynomial has {self._n}")
        out = np.zeros(X.shape[:-1])
        if not self._terms:
            return out
        maxdeg = [max(e[i] for e, _ in self._terms) for i in range(self._n)]
        powers = []
        for i in range(self._n):
            p = [np.ones(X.shape[:-1])]
            for _ in range(maxdeg[i]):
                p.append(p[-1] * X[..., i])
            powers.append(p)
        for e, c in self._terms:
            t = float(c)
            term = None
            for i, k in enumerate(e):
                if k:
                    term = powers[i][k] if term is None else term * powers[i][k]
            out = out + (t if term is None else t * term)
        return out

    # -- calculus -----------------------------------------------------------
    def diff(self, i: int, times: int = 1) -> "PolyPhase":
        P = self
        for _ in range(times):
            terms = []
            for e, c in P._terms:
                k = e[i]
                if k:
                    e2 = list(e)
                    e2[i] -= 1
                    terms.append((tuple(e2), c * k))
            P = PolyPhase(self._n, terms)
        return P

    def gradient(self) -> tuple:
        return tuple(self.diff(i) for i in range(self._n))

    def hessian(self) -> tuple:
        g = self.gradient()
        return tuple(tuple(g[i].diff(j) for j in range(self._n)) for i in range(self._n))

    def hessian_det(self):
        """Exact ``det Hess P`` for ``n <= 2``; a pointwise evaluator for ``n > 2``."""
        H = self.hessian()
        if self._n == 1:
            return H[0][0]
        if self._n == 2:
            return H[0][0] * H[1][1] - H[0][1] * H[1][0]

        def evaluator(X):
            X = np.asarray(X, dtype=float)
            M = np.stack([np.stack([h(X) for h in row], axis=-1) for row in H], axis=-2)
            return np.linalg.det(M)

        return evaluator

    # -- substitutions ------------------------------------------------------
    def shift(self, c: Sequence) -> "PolyPhase":
        """Exact ``v -> P(c + v)``."""
        cs = [_frac(v) for v in c]
        acc: dict = {}
        for e, coef in self._terms:
            ranges = [range(k + 1) for k in e]
            for beta in product(*ranges):
                t = coef
                for k, b, ci in zip(e, beta, cs):
                    if k - b:
                        t *= math.comb(k, b) * ci ** (k - b)
                if t:
                    acc[beta] = acc.get(beta, Fraction(0)) + t
        return PolyPhase(self._n, acc)

    def scale_variables(self, factors: Sequence) -> "PolyPhase":
        """Exact ``x -> P(f_1 x_1, ..., f_n x_n)``."""
        fs = [_frac(v) for v in factors]
        terms = []
        for e, c in self._terms:
            t = c
            for f, k in zip(fs, e):
                t *= f**k
            terms.append((e, t))
        return PolyPhase(self._n, terms)

    def homogeneous_part(self, degree: int) -> "PolyPhase":
        return PolyPhase(self._n, [(e, c) for e, c in self._terms if sum(e) == degree])

    def restrict(self, keep) -> "PolyPhase":
        """Keep only the terms whose exponent satisfies ``keep(exp)``."""
        return PolyPhase(self._n, [(e, c) for e, c in self._terms if keep(e)])

    # -- range bounds -------------------------------------------------------
    def interval_bound(self, lo, hi):
        """Enclosure ``[a, b]`` of the range over boxes ``lo <= x <= hi``.

        ``lo``, ``hi`` have shape ``(..., n)``; returns two arrays of shape
        ``(...)``.  Natural interval extension term by term, widened by a
        relative ``1e-12`` to absorb rounding.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        shape = lo.shape[:-1]
        a = np.zeros(shape)
        b = np.zeros(shape)
        mag = np.zeros(shape)
        for e, c in self._terms:
            tl = np.full(shape, float(c))
            th = tl.copy()
            for i, k in enumerate(e):
                if not k:
                    continue
                pl, ph = _interval_pow(lo[..., i], hi[..., i], k)
                cands = np.stack([tl * pl, tl * ph, th * pl, th * ph])
                tl, th = cands.min(axis=0), cands.max(axis=0)
            a = a + tl
            b = b + th
            mag = mag + np.maximum(np.abs(tl), np.abs(th))
        slack = 1e-12 * mag + 1e-300
        return a - slack, b + slack

    # -- serialisation ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "dimension": self._n,
            "terms": [
                {"exp": list(e), "num": c.numerator, "den": c.denominator} for e, c in self._terms
            ],
        }

    @classmethod
    def from_dict(cls, d) -> "PolyPhase":
        if not isinstance(d, dict) or "dimension" not in d or "terms" not in d:
            raise PhaseFormatError("phase must be an object with 'dimension' and 'terms'")
        n = d["dimension"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise PhaseFormatError("'dimension' must be a positive integer")
        terms = []
        for t in d["terms"]:
            try:
                exp, num, den = t["exp"], t["num"], t.get("den", 1)
            except (TypeError, KeyError) as err:
                raise PhaseFormatError(f"malformed term {t!r}") from err
            if not all(isinstance(v, int) and not isinstance(v, bool) for v in (*exp, num, den)):
                raise PhaseFormatError(f"term entries must be integers: {t!r}")
            if den == 0:
                raise PhaseFormatError(f"zero denominator in {t!r}")
            terms.append((tuple(exp), Fraction(num, den)))
        try:
            return cls(n, terms)
        except ValueError as err:
            raise PhaseFormatError(str(err)) from err

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "PolyPhase":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as err:
            raise PhaseFormatError(err.msg, err.lineno, err.colno) from err
        return cls.from_dict(d)


def _interval_pow(lo, hi, k):
    """Exact range of ``x**k`` over ``[lo, hi]`` (elementwise)."""
    pl, ph = lo**k, hi**k
    if k % 2:
        return pl, ph
    mn = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(pl, ph))
    return mn, np.maximum(pl, ph)


def eval_poly(P: PolyPhase, x, mode: str = "rational"):
    return P.eval(x, mode)


def gradient(P: PolyPhase) -> tuple:
    return P.gradient()


def hessian_det(P: PolyPhase):
    return P.hessian_det()


def load_phase(path) -> PolyPhase:
    with open(path) as fh:
        return PolyPhase.from_json(fh.read())


def dump_phase(P: PolyPhase, path) -> None:
    with open(path, "w") as fh:
        fh.write(P.to_json())
        fh.write("\n")
