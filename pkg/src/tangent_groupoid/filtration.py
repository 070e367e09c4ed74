"""Filtered manifolds presented by an ordered polynomial frame on one chart.

A chart carries a frame ``X_1, ..., X_n`` with orders ``o_1 <= ... <= o_n``;
``H^i`` is spanned by the frame fields of order at most ``i``. Module
membership is decided pointwise at a finite set of rational sample points, so
a passing validation means "verified at sample points".
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Mapping, Sequence

from . import linalg
from .graded_algebra import GradedNilpotentLieAlgebra
from .polyfields import Polynomial, PolyVectorField, lie_bracket, parse_polynomial
from .reports import Report

DEFAULT_SAMPLE_SEED = 20240601
DEFAULT_RANDOM_POINTS = 16
SAMPLE_NOTE = "verified at sample points"
PARAMETER = "t"


class SingularFrameError(ArithmeticError):
    pass


class UnvalidatedChartError(ValueError):
    pass


class NonUnimodularFrameError(ValueError):
    """The frame matrix has no polynomial inverse, so frame coefficients of
    polynomial fields need not be polynomial."""


def default_sample_points(dim: int, seed: int = DEFAULT_SAMPLE_SEED,
                          count: int = DEFAULT_RANDOM_POINTS) -> tuple[tuple[Fraction, ...], ...]:
    """The origin plus ``count`` pseudorandom small rationals from a fixed seed."""
    rng = random.Random(seed)
    points = [(Fraction(0),) * dim]
    for _ in range(count):
        points.append(tuple(Fraction(rng.randint(-6, 6), rng.randint(1, 4)) for _ in range(dim)))
    return tuple(points)


@dataclass(frozen=True)
class FilteredChart:
    coordinates: tuple[str, ...]
    frame: tuple[PolyVectorField, ...]
    orders: tuple[int, ...]
    depth: int
    sample_points: tuple[tuple[Fraction, ...], ...] = ()
    name: str = ""

    def __post_init__(self):
        coords = tuple(self.coordinates)
        n = len(coords)
        if PARAMETER in coords:
            raise ValueError(f"{PARAMETER!r} is reserved for the deformation parameter")
        frame = tuple(self.frame)
        orders = tuple(int(o) for o in self.orders)
        if len(frame) != n or len(orders) != n:
            raise ValueError(f"need {n} frame fields and {n} orders")
        for X in frame:
            if X.variables != coords or X.dim != n:
                raise ValueError("frame fields must be defined over the chart coordinates")
        if any(o < 1 or o > self.depth for o in orders):
            raise ValueError(f"orders {orders} must lie in 1..{self.depth}")
        if any(b < a for a, b in zip(orders, orders[1:])):
            raise ValueError(f"orders {orders} must be nondecreasing")
        points = tuple(tuple(Fraction(v) for v in p) for p in self.sample_points)
        if not points:
            points = default_sample_points(n)
        if any(len(p) != n for p in points):
            raise ValueError("sample points must have one entry per coordinate")
        object.__setattr__(self, "coordinates", coords)
        object.__setattr__(self, "frame", frame)
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "sample_points", points)

    @classmethod
    def from_strings(cls, coordinates: Sequence[str], frame: Sequence[Sequence[str]],
                     orders: Sequence[int], depth: int, **kwargs) -> "FilteredChart":
        """Frame given as rows of coefficient strings, one row per frame field."""
        fields = tuple(PolyVectorField.from_strings(row, coordinates) for row in frame)
        return cls(tuple(coordinates), fields, tuple(orders), depth, **kwargs)

    def with_orders(self, orders: Sequence[int], depth: int | None = None) -> "FilteredChart":
        return FilteredChart(self.coordinates, self.frame, tuple(orders),
                             self.depth if depth is None else depth, self.sample_points, self.name)

    @property
    def dim(self) -> int:
        return len(self.coordinates)

    @property
    def variables_xt(self) -> tuple[str, ...]:
        return self.coordinates + (PARAMETER,)

    def ranks(self) -> list[int]:
        """``r_i = #{a : o_a <= i}`` for ``i = 1..depth``."""
        return [sum(1 for o in self.orders if o <= i) for i in range(1, self.depth + 1)]

    def frame_matrix(self, point) -> list[list[Fraction]]:
        """Columns are the frame fields evaluated at ``point``."""
        values = [X(point) for X in self.frame]
        return [[values[a][i] for a in range(self.dim)] for i in range(self.dim)]

    def polynomial(self, text: str) -> Polynomial:
        return parse_polynomial(text, self.coordinates)

    def zero(self) -> Polynomial:
        return Polynomial.zero(self.coordinates)

    @cached_property
    def brackets(self) -> dict[tuple[int, int], PolyVectorField]:
        out = {}
        for a in range(self.dim):
            for b in range(a, self.dim):
                out[(a, b)] = lie_bracket(self.frame[a], self.frame[b])
                out[(b, a)] = -out[(a, b)]
        return out

    @cached_property
    def validation(self) -> Report:
        return validate_filtration(self)

    @cached_property
    def inverse_frame(self) -> tuple[tuple[Polynomial, ...], ...]:
        return polynomial_inverse(self)

    @cached_property
    def structure_functions(self) -> dict[tuple[int, int], tuple[Polynomial, ...]]:
        """Frame coordinates ``c_ab^k(x)`` of ``[X_a, X_b]`` (needs a unimodular frame)."""
        inv = self.inverse_frame
        out = {}
        for (a, b), V in self.brackets.items():
            out[(a, b)] = tuple(sum((inv[k][i] * V.components[i] for i in range(self.dim)),
                                    self.zero()) for k in range(self.dim))
        return out

    def __hash__(self):
        return hash((self.coordinates, self.frame, self.orders, self.depth))


def _determinant(M, rows: tuple[int, ...], cols: tuple[int, ...], memo) -> Polynomial:
    if not rows:
        return Polynomial.constant(1, M[0][0].variables)
    key = (rows, cols)
    if key not in memo:
        r, rest = rows[0], rows[1:]
        total = Polynomial.zero(M[0][0].variables)
        for j, c in enumerate(cols):
            if not M[r][c].is_zero():
                minor = _determinant(M, rest, cols[:j] + cols[j + 1:], memo)
                term = M[r][c] * minor
                total = total - term if j % 2 else total + term
        memo[key] = total
    return memo[key]


def polynomial_inverse(chart: FilteredChart) -> tuple[tuple[Polynomial, ...], ...]:
    """Exact inverse of the frame matrix, when its determinant is a nonzero constant."""
    n = chart.dim
    M = [[chart.frame[a].components[i] for a in range(n)] for i in range(n)]
    memo: dict = {}
    full = tuple(range(n))
    det = _determinant(M, full, full, memo)
    if not det.is_constant() or det.constant_term() == 0:
        raise NonUnimodularFrameError(f"frame determinant {det} is not a nonzero constant")
    inv_det = 1 / det.constant_term()
    inv = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            rows = full[:j] + full[j + 1:]
            cols = full[:i] + full[i + 1:]
            cof = _determinant(M, rows, cols, memo)
            inv[i][j] = cof * inv_det if (i + j) % 2 == 0 else -cof * inv_det
    return tuple(tuple(row) for row in inv)


def frame_coordinates_at(chart: FilteredChart, point, v) -> list[Fraction]:
    """The unique ``c`` with ``sum_a c_a X_a(point) = v``."""
    if len(v) != chart.dim:
        raise ValueError(f"tangent vector must have {chart.dim} entries")
    try:
        return linalg.solve(chart.frame_matrix(point), v)
    except linalg.SingularMatrixError:
        raise SingularFrameError(f"frame is singular at {tuple(map(str, point))}") from None


def validate_filtration(chart: FilteredChart) -> Report:
    """Check frame invertibility and ``[H^i, H^j] <= H^{i+j}`` at every sample point."""
    report = Report(f"filtration {chart.name}".strip(), notes=[SAMPLE_NOTE])
    n, N, orders = chart.dim, chart.depth, chart.orders

    singular = [p for p in chart.sample_points if linalg.det(chart.frame_matrix(p)) == 0]
    report.add("frame_spans_tangent_space", not singular,
               {"point": list(singular[0])} if singular else None)
    report.add("constant_ranks", not singular, detail=f"ranks of H^1..H^{N}: {chart.ranks()}")

    witness = None
    for a, b in combinations(range(n), 2):
        bound = min(orders[a] + orders[b], N)
        V = chart.brackets[(a, b)]
        for p in chart.sample_points:
            if p in singular:
                continue
            coords = frame_coordinates_at(chart, p, V(p))
            bad = [k for k in range(n) if coords[k] != 0 and orders[k] > bound]
            if bad:
                witness = {"pair": [a + 1, b + 1], "point": list(p), "component": bad[0] + 1,
                           "order": orders[bad[0]], "allowed_order": bound}
                break
        if witness:
            break
    report.add("bracket_condition", witness is None, witness)
    return report


def osculating_algebra_at(chart: FilteredChart, point) -> GradedNilpotentLieAlgebra:
    """Graded Lie algebra ``(+)_i H^i / H^{i-1}`` at ``point``, in the basis ``sigma(X_a)``."""
    if not chart.validation.passed:
        raise UnvalidatedChartError(f"chart {chart.name!r} failed filtration validation")
    n, orders = chart.dim, chart.orders
    F = chart.frame_matrix(point)
    try:
        Finv = linalg.inverse(F)
    except linalg.SingularMatrixError:
        raise SingularFrameError(f"frame is singular at {tuple(map(str, point))}") from None
    brackets = {}
    for a, b in combinations(range(n), 2):
        targets = [k for k in range(n) if orders[k] == orders[a] + orders[b]]
        if not targets:
            continue
        V = chart.brackets[(a, b)](point)
        coords = linalg.matvec(Finv, V)
        out = {k: coords[k] for k in targets if coords[k]}
        if out:
            brackets[(a, b)] = out
    return GradedNilpotentLieAlgebra.from_brackets(orders, brackets)


@dataclass(frozen=True)
class Splitting:
    """``psi(sigma(X_a)) = X_a + sum_{o_b < o_a} s_ab(x) X_b``.

    ``corrections`` is keyed by 0-based ``(a, b)`` pairs.
    """

    chart: FilteredChart
    corrections: Mapping[tuple[int, int], Polynomial] = field(default_factory=dict)

    def __post_init__(self):
        orders = self.chart.orders
        cleaned = {}
        for (a, b), s in dict(self.corrections).items():
            if isinstance(s, str):
                s = self.chart.polynomial(s)
            elif not isinstance(s, Polynomial):
                s = Polynomial.constant(s, self.chart.coordinates)
            if not orders[b] < orders[a]:
                raise ValueError(f"correction ({a + 1},{b + 1}) is not strictly below the "
                                 f"diagonal in order ({orders[a]} <= {orders[b]})")
            if s.variables != self.chart.coordinates:
                raise ValueError("corrections must be polynomials in the chart coordinates")
            if not s.is_zero():
                cleaned[(a, b)] = s
        object.__setattr__(self, "corrections", cleaned)

    def __hash__(self):
        return hash((self.chart, frozenset(self.corrections.items())))

    def __eq__(self, other):
        if not isinstance(other, Splitting):
            return NotImplemented
        return self.chart == other.chart and self.corrections == other.corrections

    def is_canonical(self) -> bool:
        return not self.corrections

    def matrix(self) -> list[list[Polynomial]]:
        """Row ``a`` holds the frame coefficients of ``psi(sigma(X_a))``."""
        n = self.chart.dim
        one = Polynomial.constant(1, self.chart.coordinates)
        M = [[one if a == b else self.chart.zero() for b in range(n)] for a in range(n)]
        for (a, b), s in self.corrections.items():
            M[a][b] = s
        return M

    def matrix_at(self, point) -> list[list[Fraction]]:
        return [[p(point) for p in row] for row in self.matrix()]

    @cached_property
    def fields(self) -> tuple[PolyVectorField, ...]:
        """The vector fields ``psi(sigma(X_a))``."""
        out = []
        for a, row in enumerate(self.matrix()):
            V = self.chart.frame[a]
            for b, s in enumerate(row):
                if b != a and not s.is_zero():
                    V = V + self.chart.frame[b] * s
            out.append(V)
        return tuple(out)


def canonical_splitting(chart: FilteredChart) -> Splitting:
    """The splitting defined by the frame itself (all corrections zero)."""
    return Splitting(chart, {})
