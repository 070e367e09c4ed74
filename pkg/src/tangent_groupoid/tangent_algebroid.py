"""Sections of ``TM x R`` and of the osculating bundle ``t_HM x R`` on a chart.

Both section types store one polynomial in ``(x, t)`` per frame index:

* :class:`HSection` coefficients ``p_a`` stand for ``sum_a p_a X_a``;
* :class:`GradedSection` coefficients ``q_a`` stand for ``sum_a q_a sigma(X_a)``.

Because sections are polynomial in ``t``, the vanishing conditions at ``t = 0``
reduce to divisibility of ``p_a`` by ``t**o_a``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

from . import linalg
from .filtration import PARAMETER, FilteredChart, Splitting, osculating_algebra_at
from .graded_algebra import AlgebraVector
from .polyfields import Polynomial, PolyVectorField, degree_cap, lie_bracket, parse_polynomial

# t-powers from the dilations add up to twice the depth in every product
SECTION_DEGREE_CAP = 16


class MembershipError(ValueError):
    pass


class ChartMismatchError(ValueError):
    pass


def _coerce_coefficients(chart: FilteredChart, coeffs) -> tuple[Polynomial, ...]:
    variables = chart.variables_xt
    out = []
    for c in coeffs:
        if isinstance(c, str):
            c = parse_polynomial(c, variables)
        elif not isinstance(c, Polynomial):
            c = Polynomial.constant(c, variables)
        elif c.variables == chart.coordinates:
            c = c.extend(variables)
        if c.variables != variables:
            raise ChartMismatchError(f"coefficient over {c.variables}, expected {variables}")
        out.append(c)
    if len(out) != chart.dim:
        raise ChartMismatchError(f"need {chart.dim} coefficients, got {len(out)}")
    return tuple(out)


@dataclass(frozen=True, eq=False)
class _Section:
    chart: FilteredChart
    coefficients: tuple[Polynomial, ...]

    def __post_init__(self):
        with degree_cap(SECTION_DEGREE_CAP):
            object.__setattr__(self, "coefficients", _coerce_coefficients(self.chart, self.coefficients))

    @classmethod
    def zero(cls, chart: FilteredChart):
        return cls(chart, [0] * chart.dim)

    def _check(self, other):
        if type(other) is not type(self) or other.chart != self.chart:
            raise ChartMismatchError("sections live on different charts")

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.chart == other.chart and self.coefficients == other.coefficients

    def __hash__(self):
        return hash((type(self).__name__, self.coefficients))

    def __add__(self, other):
        self._check(other)
        with degree_cap(SECTION_DEGREE_CAP):
            return type(self)(self.chart, [a + b for a, b in zip(self.coefficients, other.coefficients)])

    def __sub__(self, other):
        self._check(other)
        with degree_cap(SECTION_DEGREE_CAP):
            return type(self)(self.chart, [a - b for a, b in zip(self.coefficients, other.coefficients)])

    def __neg__(self):
        return type(self)(self.chart, [-a for a in self.coefficients])

    def __mul__(self, f):
        """Multiply by a scalar or a function of ``(x, t)`` (module structure)."""
        if isinstance(f, Polynomial) and f.variables == self.chart.coordinates:
            f = f.extend(self.chart.variables_xt)
        with degree_cap(SECTION_DEGREE_CAP):
            return type(self)(self.chart, [a * f for a in self.coefficients])

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coefficients)

    def to_strings(self) -> list[str]:
        return [str(c) for c in self.coefficients]


class HSection(_Section):
    """``sum_a p_a(x, t) X_a``, a section of ``TM x R``."""

    @classmethod
    def from_field(cls, chart: FilteredChart, a: int, power: int | None = None, coefficient=1):
        """``coefficient * t**power * X_a``; ``power`` defaults to the order of ``X_a``."""
        power = chart.orders[a] if power is None else power
        t = Polynomial.variable(PARAMETER, chart.variables_xt)
        coeffs = [0] * chart.dim
        coeffs[a] = (t ** power) * coefficient
        return cls(chart, coeffs)

    def vector_field(self) -> PolyVectorField:
        """Coordinate expression as a field on the chart with ``t`` as a parameter."""
        variables = self.chart.variables_xt
        with degree_cap(SECTION_DEGREE_CAP):
            total = PolyVectorField.zero(variables, self.chart.dim)
            for p, X in zip(self.coefficients, self.chart.frame):
                if not p.is_zero():
                    total = total + X.extend(variables) * p
        return total


class GradedSection(_Section):
    """``sum_a q_a(x, t) sigma(X_a)``, a section of ``t_HM x R``."""

    def restrict_zero(self) -> "GradedSection":
        """The section ``Y|_{t=0}``, constant in ``t``."""
        return GradedSection(self.chart, [c.subs({PARAMETER: 0}) for c in self.coefficients])

    def at(self, point, t=0) -> AlgebraVector:
        """Fiber value at ``(point, t)`` in the graded basis."""
        values = tuple(Fraction(v) for v in point) + (Fraction(t),)
        return tuple(c(values) for c in self.coefficients)


class Membership(NamedTuple):
    member: bool
    witness: tuple[int, int] | None  # (1-based frame index a, t-power k)

    def __bool__(self):
        return self.member


def membership_XH(s: HSection) -> Membership:
    """Whether ``t**o_a`` divides every ``p_a``; else the offending ``(a, k)``."""
    for a, (p, o) in enumerate(zip(s.coefficients, s.chart.orders)):
        k = p.lowest_power(PARAMETER)
        if k is not None and k < o:
            return Membership(False, (a + 1, k))
    return Membership(True, None)


def _require_member(s: HSection):
    m = membership_XH(s)
    if not m:
        a, k = m.witness
        raise MembershipError(f"section is not in X_H: coefficient {a} has a t^{k} term "
                              f"but X_{a} has order {s.chart.orders[a - 1]}")


def ev_t(s: HSection, t0) -> PolyVectorField:
    """Restriction ``X|_t`` at a fixed ``t0 != 0``, as a vector field on the chart."""
    t0 = Fraction(t0)
    if t0 == 0:
        raise ValueError("ev_t needs t != 0; use ev0H at t = 0")
    with degree_cap(SECTION_DEGREE_CAP):
        total = PolyVectorField.zero(s.chart.coordinates)
        for p, X in zip(s.coefficients, s.chart.frame):
            c = p.subs({PARAMETER: t0})
            if not c.is_zero():
                total = total + X * c
    return total


def ev0H(s: HSection) -> GradedSection:
    """Graded Taylor coefficients at ``t = 0``: ``q_a = [t^{o_a}] p_a``."""
    _require_member(s)
    coeffs = [p.coefficient(PARAMETER, o) for p, o in zip(s.coefficients, s.chart.orders)]
    return GradedSection(s.chart, coeffs)


def _check_splitting(psi: Splitting, section):
    if psi.chart != section.chart:
        raise ChartMismatchError("splitting and section live on different charts")


def phi_psi(psi: Splitting, Y: GradedSection) -> HSection:
    """``(x, t) -> psi(delta_t Y(x, t))``: ``p_b = sum_a t^{o_a} q_a Psi_ab``."""
    _check_splitting(psi, Y)
    chart = psi.chart
    variables = chart.variables_xt
    t = Polynomial.variable(PARAMETER, variables)
    Psi = psi.matrix()
    with degree_cap(SECTION_DEGREE_CAP):
        scaled = [(t ** o) * q for q, o in zip(Y.coefficients, chart.orders)]
        out = []
        for b in range(chart.dim):
            total = Polynomial.zero(variables)
            for a in range(chart.dim):
                if not Psi[a][b].is_zero() and not scaled[a].is_zero():
                    total = total + scaled[a] * Psi[a][b].extend(variables)
            out.append(total)
        return HSection(chart, out)


def phi_psi_inverse(psi: Splitting, s: HSection) -> GradedSection:
    """Unique ``Y`` with ``phi_psi(psi, Y) == s`` (back substitution, then division by ``t^{o_a}``)."""
    _check_splitting(psi, s)
    _require_member(s)
    chart = psi.chart
    n, orders = chart.dim, chart.orders
    variables = chart.variables_xt
    corrections = {k: v.extend(variables) for k, v in psi.corrections.items()}
    with degree_cap(SECTION_DEGREE_CAP):
        u: list[Polynomial | None] = [None] * n
        # p_b = u_b + sum_{o_a > o_b} u_a s_ab, solved from the top order down
        for b in reversed(range(n)):
            total = s.coefficients[b]
            for a in range(n):
                if (a, b) in corrections:
                    total = total - u[a] * corrections[(a, b)]
            u[b] = total
        return GradedSection(chart, [ua.divide_power(PARAMETER, o) for ua, o in zip(u, orders)])


def transition_matrix(psi: Splitting, phi: Splitting, point) -> list[list[Polynomial]]:
    """Matrix of ``delta_t^{-1} phi^{-1} psi delta_t`` in the graded basis at ``point``.

    Entries are polynomials in ``t`` alone; column ``k`` is the image of ``e_k``.
    """
    if psi.chart != phi.chart:
        raise ChartMismatchError("splittings live on different charts")
    chart = psi.chart
    n, orders = chart.dim, chart.orders
    # columns of A_psi are the frame coordinates of psi(e_a)
    A_psi = linalg.transpose(psi.matrix_at(point))
    A_phi = linalg.transpose(phi.matrix_at(point))
    C = linalg.matmul(linalg.inverse(A_phi), A_psi)
    t = Polynomial.variable(PARAMETER, (PARAMETER,))
    out = []
    for j in range(n):
        row = []
        for k in range(n):
            c = C[j][k]
            if c == 0:
                row.append(Polynomial.zero((PARAMETER,)))
            elif orders[k] >= orders[j]:
                row.append((t ** (orders[k] - orders[j])) * c)
            else:
                # phi^{-1} psi never lowers the order, so this branch is unreachable
                raise ArithmeticError("splitting change raised a component's order")
        out.append(row)
    return out


def algebroid_bracket(s1: HSection, s2: HSection) -> HSection:
    """``[X, Y](x, t) = [X_t, Y_t](x)``, re-expressed in the frame.

    Computed from the coordinate Lie bracket with ``t`` as a parameter and the
    polynomial inverse of the frame matrix.
    """
    s1._check(s2)
    _require_member(s1)
    _require_member(s2)
    chart = s1.chart
    variables = chart.variables_xt
    inv = [[c.extend(variables) for c in row] for row in chart.inverse_frame]
    with degree_cap(SECTION_DEGREE_CAP):
        V = lie_bracket(s1.vector_field(), s2.vector_field())
        coeffs = []
        for k in range(chart.dim):
            total = Polynomial.zero(variables)
            for i, Vi in enumerate(V.components):
                if not inv[k][i].is_zero() and not Vi.is_zero():
                    total = total + inv[k][i] * Vi
            coeffs.append(total)
        return HSection(chart, coeffs)


def frame_bracket(s1: HSection, s2: HSection) -> HSection:
    """The same bracket from the frame structure functions:

    ``r_k = sum_ab p_a q_b c_ab^k + s1(q_k) - s2(p_k)``.
    """
    s1._check(s2)
    chart = s1.chart
    n = chart.dim
    variables = chart.variables_xt
    c = {ab: [f.extend(variables) for f in fs] for ab, fs in chart.structure_functions.items()}
    frame = [X.extend(variables) for X in chart.frame]
    p, q = s1.coefficients, s2.coefficients
    with degree_cap(SECTION_DEGREE_CAP):
        def derivative(coeffs, f):
            total = Polynomial.zero(variables)
            for a in range(n):
                if not coeffs[a].is_zero():
                    total = total + coeffs[a] * frame[a].apply(f)
            return total

        out = []
        for k in range(n):
            total = derivative(p, q[k]) - derivative(q, p[k])
            for a in range(n):
                for b in range(n):
                    if a != b and not c[(a, b)][k].is_zero() and not p[a].is_zero() and not q[b].is_zero():
                        total = total + p[a] * q[b] * c[(a, b)][k]
            out.append(total)
        return HSection(chart, out)


def osculating_bracket_at(chart: FilteredChart, point, Y1: GradedSection, Y2: GradedSection,
                          t=0) -> AlgebraVector:
    """Pointwise bracket ``[Y1(x), Y2(x)]`` in the osculating algebra at ``point``."""
    alg = osculating_algebra_at(chart, point)
    return alg.bracket(Y1.at(point, t), Y2.at(point, t))


def make_section(kind: str, chart: FilteredChart, coefficients: Sequence):
    if kind in ("H", "h", "HSection"):
        return HSection(chart, coefficients)
    if kind in ("graded", "GradedSection"):
        return GradedSection(chart, coefficients)
    raise ValueError(f"unknown section kind {kind!r}")
