"""Hypothesis strategies shared by the property tests."""

from fractions import Fraction

from hypothesis import strategies as st

from hessosc import PolyPhase

small_fracs = st.fractions(min_value=-4, max_value=4, max_denominator=9)
nonzero_fracs = small_fracs.filter(lambda f: f != 0)


@st.composite
def polys(draw, dimension=2, max_degree=4, min_terms=1, max_terms=6, min_degree=0):
    exps = st.tuples(*[st.integers(0, max_degree)] * dimension).filter(
        lambda e: min_degree <= sum(e) <= max_degree
    )
    terms = draw(st.dictionaries(exps, nonzero_fracs, min_size=min_terms, max_size=max_terms))
    return PolyPhase(dimension, terms)


def points(dimension=2):
    return st.lists(small_fracs, min_size=dimension, max_size=dimension)


@st.composite
def perturbed_quadratics(draw):
    """Nondegenerate quadratic at the origin plus small cubic/quartic terms."""
    x1, x2 = PolyPhase.variables(2)
    h1 = draw(st.sampled_from([1, -1])) * draw(st.fractions(Fraction(1, 2), 2, max_denominator=8))
    h2 = draw(st.sampled_from([1, -1])) * draw(st.fractions(Fraction(1, 2), 2, max_denominator=8))
    P = h1 * x1**2 / 2 + h2 * x2**2 / 2
    higher = st.fractions(Fraction(-1, 5), Fraction(1, 5), max_denominator=20)
    for e in [(3, 0), (2, 1), (1, 2), (0, 3), (4, 0), (2, 2), (0, 4)]:
        P = P + draw(higher) * x1 ** e[0] * x2 ** e[1]
    return P
