"""Exact multivariate polynomials and polynomial vector fields.

A :class:`Polynomial` is a sparse map from exponent tuples to
:class:`~fractions.Fraction` coefficients over a fixed, ordered tuple of
variable names. A :class:`PolyVectorField` has one coefficient polynomial per
*coordinate* variable; any further variables of its polynomials (such as the
deformation parameter ``t``) are parameters the field does not differentiate
along.

The text grammar used in manifests is ``c * x^a * y^b`` terms joined by ``+``
and ``-``, with ``c`` an integer or ``p/q``.
"""

from __future__ import annotations

import contextlib
import contextvars
import re
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_MAX_DEGREE = 8

_max_degree = contextvars.ContextVar("max_degree", default=DEFAULT_MAX_DEGREE)


class DegreeOverflowError(ValueError):
    pass


class VariableMismatchError(ValueError):
    pass


class PolynomialParseError(ValueError):
    def __init__(self, message: str, text: str, column: int):
        super().__init__(f"{message} at column {column}: {text!r}")
        self.text = text
        self.column = column


@contextlib.contextmanager
def degree_cap(max_degree: int):
    """Temporarily change the total-degree cap on constructed polynomials."""
    token = _max_degree.set(max_degree)
    try:
        yield
    finally:
        _max_degree.reset(token)


Scalar = int | Fraction


def _is_scalar(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


class Polynomial:
    """Immutable polynomial with exact rational coefficients."""

    __slots__ = ("variables", "_terms", "_hash")

    def __init__(self, variables: Sequence[str], terms: Mapping[tuple, Scalar] | None = None):
        self.variables = tuple(variables)
        n = len(self.variables)
        cleaned = {}
        cap = _max_degree.get()
        for exps, c in (terms or {}).items():
            c = Fraction(c)
            if c == 0:
                continue
            exps = tuple(int(e) for e in exps)
            if len(exps) != n or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent tuple {exps} for variables {self.variables}")
            if sum(exps) > cap:
                raise DegreeOverflowError(
                    f"term of degree {sum(exps)} exceeds the degree cap {cap}")
            cleaned[exps] = c
        self._terms = cleaned
        self._hash = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, c: Scalar, variables: Sequence[str]) -> "Polynomial":
        return cls(variables, {(0,) * len(variables): c})

    @classmethod
    def zero(cls, variables: Sequence[str]) -> "Polynomial":
        return cls(variables)

    @classmethod
    def variable(cls, name: str, variables: Sequence[str]) -> "Polynomial":
        variables = tuple(variables)
        exps = tuple(int(v == name) for v in variables)
        if sum(exps) != 1:
            raise VariableMismatchError(f"{name!r} is not one of {variables}")
        return cls(variables, {exps: 1})

    # -- basic accessors ----------------------------------------------------

    @property
    def terms(self) -> dict[tuple, Fraction]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self._terms)

    def constant_term(self) -> Fraction:
        return self._terms.get((0,) * len(self.variables), Fraction(0))

    @property
    def degree(self) -> int:
        """Total degree; ``-1`` for the zero polynomial."""
        return max((sum(e) for e in self._terms), default=-1)

    def degree_in(self, var: str) -> int:
        i = self._index(var)
        return max((e[i] for e in self._terms), default=-1)

    def _index(self, var: str) -> int:
        try:
            return self.variables.index(var)
        except ValueError:
            raise VariableMismatchError(f"{var!r} is not one of {self.variables}") from None

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.variables != self.variables:
                raise VariableMismatchError(
                    f"variables differ: {self.variables} vs {other.variables}")
            return other
        if _is_scalar(other):
            return Polynomial.constant(other, self.variables)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for e, c in other._terms.items():
            terms[e] = terms.get(e, 0) + c
        return Polynomial(self.variables, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.variables, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if _is_scalar(other):
            return Polynomial(self.variables, {e: c * other for e, c in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: dict[tuple, Fraction] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0) + c1 * c2
        return Polynomial(self.variables, terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if _is_scalar(other):
            return self * (1 / Fraction(other))
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        result = Polynomial.constant(1, self.variables)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.variables == other.variables and self._terms == other._terms
        if _is_scalar(other):
            return self.is_constant() and self.constant_term() == other
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.variables, frozenset(self._terms.items())))
        return self._hash

    # -- calculus and substitution -----------------------------------------

    def diff(self, var: str) -> "Polynomial":
        i = self._index(var)
        terms = {}
        for e, c in self._terms.items():
            if e[i]:
                terms[e[:i] + (e[i] - 1,) + e[i + 1:]] = c * e[i]
        return Polynomial(self.variables, terms)

    def integrate(self, var: str) -> "Polynomial":
        """Antiderivative in ``var`` vanishing at ``var = 0``."""
        i = self._index(var)
        terms = {}
        for e, c in self._terms.items():
            terms[e[:i] + (e[i] + 1,) + e[i + 1:]] = c / (e[i] + 1)
        return Polynomial(self.variables, terms)

    def _point_values(self, point) -> list[Fraction]:
        if isinstance(point, Mapping):
            missing = [v for v in self.variables if v not in point]
            if missing:
                raise VariableMismatchError(f"no value for {missing}")
            return [Fraction(point[v]) for v in self.variables]
        values = [Fraction(v) for v in point]
        if len(values) != len(self.variables):
            raise VariableMismatchError(
                f"point has {len(values)} entries, polynomial has {len(self.variables)} variables")
        return values

    def __call__(self, point) -> Fraction:
        values = self._point_values(point)
        total = Fraction(0)
        for e, c in self._terms.items():
            term = c
            for v, k in zip(values, e):
                if k:
                    term *= v ** k
            total += term
        return total

    evaluate = __call__

    def subs(self, values: Mapping[str, Scalar]) -> "Polynomial":
        """Substitute numbers for some variables, which are then dropped."""
        idx = [self._index(v) for v in values]
        keep = [i for i in range(len(self.variables)) if i not in idx]
        vals = [Fraction(values[self.variables[i]]) for i in idx]
        terms: dict[tuple, Fraction] = {}
        for e, c in self._terms.items():
            for i, v in zip(idx, vals):
                if e[i]:
                    c = c * v ** e[i]
            key = tuple(e[i] for i in keep)
            terms[key] = terms.get(key, 0) + c
        return Polynomial([self.variables[i] for i in keep], terms)

    def compose(self, substitutions: Mapping[str, "Polynomial"]) -> "Polynomial":
        """Replace every variable by a polynomial; all replacements share one variable set."""
        polys = [substitutions[v] for v in self.variables]
        target = polys[0].variables if polys else ()
        if any(p.variables != target for p in polys):
            raise VariableMismatchError("substituted polynomials must share variables")
        cache: dict[tuple[int, int], Polynomial] = {}

        def power(i, k):
            if (i, k) not in cache:
                cache[(i, k)] = polys[i] ** k
            return cache[(i, k)]

        result = Polynomial.zero(target)
        for e, c in self._terms.items():
            term = Polynomial.constant(c, target)
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k)
            result = result + term
        return result

    def extend(self, variables: Sequence[str]) -> "Polynomial":
        """Embed into a ring with more variables (every current variable must be kept)."""
        variables = tuple(variables)
        pos = [variables.index(v) if v in variables else -1 for v in self.variables]
        if -1 in pos:
            raise VariableMismatchError(f"{self.variables} not contained in {variables}")
        terms = {}
        for e, c in self._terms.items():
            new = [0] * len(variables)
            for p, k in zip(pos, e):
                new[p] = k
            terms[tuple(new)] = c
        return Polynomial(variables, terms)

    def coefficient(self, var: str, k: int) -> "Polynomial":
        """Coefficient of ``var**k``, as a polynomial in the remaining variables."""
        i = self._index(var)
        terms = {e[:i] + e[i + 1:]: c for e, c in self._terms.items() if e[i] == k}
        return Polynomial(self.variables[:i] + self.variables[i + 1:], terms)

    def lowest_power(self, var: str) -> int | None:
        """Largest ``k`` with ``var**k`` dividing the polynomial; ``None`` for zero."""
        i = self._index(var)
        return min((e[i] for e in self._terms), default=None)

    def divide_power(self, var: str, k: int) -> "Polynomial":
        i = self._index(var)
        terms = {}
        for e, c in self._terms.items():
            if e[i] < k:
                raise ArithmeticError(f"{var}^{k} does not divide {self}")
            terms[e[:i] + (e[i] - k,) + e[i + 1:]] = c
        return Polynomial(self.variables, terms)

    # -- printing -----------------------------------------------------------

    def sorted_terms(self) -> list[tuple[tuple, Fraction]]:
        """Terms in canonical order: higher total degree first, then lexicographically."""
        return sorted(self._terms.items(), key=lambda ec: (-sum(ec[0]), tuple(-k for k in ec[0])))

    def __str__(self):
        if not self._terms:
            return "0"
        pieces = []
        for e, c in self.sorted_terms():
            mono = "*".join(v if k == 1 else f"{v}^{k}"
                            for v, k in zip(self.variables, e) if k)
            mag = abs(c)
            if not mono:
                body = str(mag)
            elif mag == 1:
                body = mono
            else:
                body = f"{mag}*{mono}"
            pieces.append(("-" if c < 0 else "+", body))
        first_sign, first = pieces[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, body in pieces[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self):
        return f"Polynomial({str(self)!r}, variables={self.variables})"


# -- text grammar -----------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:/\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*^]))")


def parse_polynomial(text: str, variables: Sequence[str]) -> Polynomial:
    """Parse the manifest polynomial grammar, e.g. ``"x^2 - 1/2*y*z + 3"``."""
    variables = tuple(variables)
    tokens = []
    pos = 0
    stripped = text.rstrip()
    while pos < len(stripped):
        m = _TOKEN.match(stripped, pos)
        if not m:
            bad = len(stripped) - len(stripped[pos:].lstrip())
            raise PolynomialParseError("unexpected character", text, bad + 1)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    if not tokens:
        raise PolynomialParseError("empty polynomial", text, 1)

    result = Polynomial.zero(variables)
    i = 0
    sign = 1
    expect_term = True
    while i < len(tokens):
        kind, val, col = tokens[i]
        if expect_term and kind == "op" and val in "+-":
            sign = -sign if val == "-" else sign
            i += 1
            continue
        if not expect_term:
            if kind == "op" and val in "+-":
                sign = -1 if val == "-" else 1
                expect_term = True
                i += 1
                continue
            raise PolynomialParseError(f"expected '+' or '-', got {val!r}", text, col)
        coeff = Fraction(sign)
        exps = [0] * len(variables)
        while True:
            if i >= len(tokens):
                raise PolynomialParseError("expected a factor", text, len(text) + 1)
            kind, val, col = tokens[i]
            if kind == "num":
                coeff *= Fraction(val)
                i += 1
            elif kind == "name":
                if val not in variables:
                    raise PolynomialParseError(f"unknown variable {val!r}", text, col)
                k = 1
                i += 1
                if i < len(tokens) and tokens[i][1] == "^":
                    if i + 1 >= len(tokens) or tokens[i + 1][0] != "num" or "/" in tokens[i + 1][1]:
                        raise PolynomialParseError("expected integer exponent", text, tokens[i][2])
                    k = int(tokens[i + 1][1])
                    i += 2
                exps[variables.index(val)] += k
            else:
                raise PolynomialParseError(f"expected a factor, got {val!r}", text, col)
            if i < len(tokens) and tokens[i][1] == "*":
                i += 1
                continue
            break
        result = result + Polynomial(variables, {tuple(exps): coeff})
        expect_term = False
        sign = 1
    if expect_term:
        raise PolynomialParseError("dangling operator", text, tokens[-1][2])
    return result


# -- vector fields ------------------------------------------------------------


class PolyVectorField:
    """Polynomial vector field ``sum_j X^j d/dx_j`` on a coordinate chart.

    ``components[j]`` is the coefficient of ``d/dx_j``. The coordinate names are
    the first ``len(components)`` variables of the coefficient polynomials.
    """

    __slots__ = ("components",)

    def __init__(self, components: Iterable[Polynomial]):
        comps = tuple(components)
        if not comps:
            raise ValueError("a vector field needs at least one component")
        variables = comps[0].variables
        if any(c.variables != variables for c in comps):
            raise VariableMismatchError("all components must share one variable tuple")
        if len(comps) > len(variables):
            raise ValueError("more components than variables")
        self.components = comps

    @classmethod
    def from_strings(cls, texts: Sequence[str], variables: Sequence[str]) -> "PolyVectorField":
        return cls(parse_polynomial(s, variables) for s in texts)

    @classmethod
    def coordinate(cls, j: int, variables: Sequence[str], dim: int | None = None):
        """The coordinate field ``d/dx_j`` (0-based index)."""
        dim = len(variables) if dim is None else dim
        return cls(Polynomial.constant(int(i == j), variables) for i in range(dim))

    @classmethod
    def zero(cls, variables: Sequence[str], dim: int | None = None):
        dim = len(variables) if dim is None else dim
        return cls(Polynomial.zero(variables) for _ in range(dim))

    @property
    def variables(self) -> tuple[str, ...]:
        return self.components[0].variables

    @property
    def coordinates(self) -> tuple[str, ...]:
        return self.variables[: len(self.components)]

    @property
    def dim(self) -> int:
        return len(self.components)

    def _check(self, other: "PolyVectorField"):
        if self.variables != other.variables or self.dim != other.dim:
            raise VariableMismatchError("vector fields live on different charts")

    def __add__(self, other: "PolyVectorField"):
        self._check(other)
        return PolyVectorField(a + b for a, b in zip(self.components, other.components))

    def __sub__(self, other: "PolyVectorField"):
        self._check(other)
        return PolyVectorField(a - b for a, b in zip(self.components, other.components))

    def __neg__(self):
        return PolyVectorField(-a for a in self.components)

    def __mul__(self, f):
        """Multiply by a scalar or a polynomial function."""
        return PolyVectorField(a * f for a in self.components)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        return self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def apply(self, f: Polynomial) -> Polynomial:
        """Directional derivative ``sum_j X^j df/dx_j``."""
        if f.variables != self.variables:
            raise VariableMismatchError(f"function over {f.variables}, field over {self.variables}")
        result = Polynomial.zero(self.variables)
        for Xj, xj in zip(self.components, self.coordinates):
            if not Xj.is_zero():
                result = result + Xj * f.diff(xj)
        return result

    def __call__(self, point) -> tuple[Fraction, ...]:
        return tuple(c(point) for c in self.components)

    def subs(self, values: Mapping[str, Scalar]) -> "PolyVectorField":
        if any(v in self.coordinates for v in values):
            raise VariableMismatchError("cannot substitute for a coordinate variable")
        return PolyVectorField(c.subs(values) for c in self.components)

    def extend(self, variables: Sequence[str]) -> "PolyVectorField":
        """Add parameter variables (appended after the coordinates)."""
        if tuple(variables)[: self.dim] != self.coordinates:
            raise VariableMismatchError("coordinates must stay a prefix of the variables")
        return PolyVectorField(c.extend(variables) for c in self.components)

    def __str__(self):
        parts = [f"({c})*d{x}" for c, x in zip(self.components, self.coordinates) if not c.is_zero()]
        return " + ".join(parts) if parts else "0"

    def __repr__(self):
        return f"PolyVectorField([{', '.join(repr(str(c)) for c in self.components)}])"


def lie_bracket(X: PolyVectorField, Y: PolyVectorField) -> PolyVectorField:
    """``[X, Y]^i = sum_j X^j d_j Y^i - Y^j d_j X^i``."""
    X._check(Y)
    return PolyVectorField(X.apply(Yi) - Y.apply(Xi)
                           for Xi, Yi in zip(X.components, Y.components))


def evaluate(X: PolyVectorField, point) -> tuple[Fraction, ...]:
    return X(point)


def apply(X: PolyVectorField, f: Polynomial) -> Polynomial:
    return X.apply(f)


# -- floating point evaluation ------------------------------------------------


class FloatEvaluator:
    """Vectorised binary64 evaluation of a fixed list of polynomials.

    Calling with an array of shape ``(..., nvars)`` returns ``(..., npolys)``.
    """

    def __init__(self, polys: Sequence[Polynomial]):
        polys = list(polys)
        self.nvars = len(polys[0].variables) if polys else 0
        monomials = sorted({e for p in polys for e in p._terms})
        index = {e: k for k, e in enumerate(monomials)}
        self.exponents = np.array(monomials, dtype=np.int64).reshape(len(monomials), self.nvars)
        self.coeffs = np.zeros((len(polys), len(monomials)))
        for i, p in enumerate(polys):
            for e, c in p._terms.items():
                self.coeffs[i, index[e]] = float(c)
        self.max_power = int(self.exponents.max(initial=0))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not len(self.exponents):
            return np.zeros(x.shape[:-1] + (self.coeffs.shape[0],))
        # powers[..., var, k] = x_var**k, built by repeated multiplication
        powers = np.ones(x.shape + (self.max_power + 1,))
        for k in range(1, self.max_power + 1):
            powers[..., k] = powers[..., k - 1] * x
        mono = np.ones(x.shape[:-1] + (len(self.exponents),))
        for v in range(self.nvars):
            mono = mono * powers[..., v, :][..., self.exponents[:, v]]
        return mono @ self.coeffs.T
