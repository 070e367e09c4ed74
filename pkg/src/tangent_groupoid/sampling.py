"""Seeded random rationals, polynomials, sections and splittings for property checks."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction
from typing import Sequence

from .filtration import FilteredChart, Splitting
from .polyfields import Polynomial
from .tangent_algebroid import GradedSection


def rational(rng: random.Random, bound: int = 5, max_den: int = 4) -> Fraction:
    return Fraction(rng.randint(-bound, bound), rng.randint(1, max_den))


def nonzero_rational(rng: random.Random, bound: int = 5, max_den: int = 4) -> Fraction:
    while True:
        q = rational(rng, bound, max_den)
        if q:
            return q


def vector(rng: random.Random, n: int, **kw) -> tuple[Fraction, ...]:
    return tuple(rational(rng, **kw) for _ in range(n))


def polynomial(rng: random.Random, variables: Sequence[str], degree: int = 2,
               terms: int = 3, degrees: Sequence[int] | None = None) -> Polynomial:
    """Sum of ``terms`` random monomials of total degree at most ``degree``.

    ``degrees`` optionally bounds the exponent of each variable separately.
    """
    variables = tuple(variables)
    caps = tuple(degrees) if degrees is not None else (degree,) * len(variables)
    monomials = [e for e in itertools.product(*(range(c + 1) for c in caps)) if sum(e) <= degree]
    out = {}
    for _ in range(terms):
        e = rng.choice(monomials)
        out[e] = out.get(e, Fraction(0)) + nonzero_rational(rng)
    return Polynomial(variables, out)


def graded_section(rng: random.Random, chart: FilteredChart, degree: int = 2,
                   t_degree: int = 1, terms: int = 2) -> GradedSection:
    variables = chart.variables_xt
    caps = (degree,) * chart.dim + (t_degree,)
    return GradedSection(chart, [polynomial(rng, variables, degree, terms, caps)
                                 for _ in range(chart.dim)])


def splitting(rng: random.Random, chart: FilteredChart, degree: int = 1) -> Splitting:
    corrections = {}
    for a, b in itertools.product(range(chart.dim), repeat=2):
        if chart.orders[b] < chart.orders[a] and rng.random() < 0.7:
            corrections[(a, b)] = polynomial(rng, chart.coordinates, degree, 2)
    return Splitting(chart, corrections)
