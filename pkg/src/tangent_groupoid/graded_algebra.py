"""Graded nilpotent Lie algebras with exact rational structure constants.

Vectors are plain tuples of :class:`~fractions.Fraction` in the graded basis
``e_1, ..., e_n``, ordered by nondecreasing weight. The group law on the
simply connected group is the Baker-Campbell-Hausdorff series in Dynkin's
form, which terminates because every bracket word longer than the depth
vanishes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Mapping, Sequence

from .reports import Report

AlgebraVector = tuple[Fraction, ...]


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GradedNilpotentLieAlgebra:
    """Structure constants ``c[a][b][k]`` with ``[e_a, e_b] = sum_k c[a][b][k] e_k``.

    Construction does not check the Lie axioms; use :func:`verify_algebra`.
    """

    weights: tuple[int, ...]
    constants: tuple[tuple[tuple[Fraction, ...], ...], ...]

    def __post_init__(self):
        weights = tuple(int(w) for w in self.weights)
        n = len(weights)
        if n == 0:
            raise ValueError("algebra must have positive dimension")
        if any(w < 1 for w in weights):
            raise ValueError(f"weights must be positive integers, got {weights}")
        if any(w2 < w1 for w1, w2 in zip(weights, weights[1:])):
            raise ValueError(f"weights must be nondecreasing, got {weights}")
        c = tuple(tuple(tuple(Fraction(x) for x in row) for row in plane) for plane in self.constants)
        if len(c) != n or any(len(p) != n or any(len(r) != n for r in p) for p in c):
            raise DimensionMismatchError(f"structure constants must be {n}x{n}x{n}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "constants", c)

    @classmethod
    def from_brackets(cls, weights: Sequence[int],
                      brackets: Mapping[tuple[int, int], Mapping[int, object]]):
        """Build from ``{(a, b): {k: c}}`` (0-based), filling ``[e_b, e_a]`` by antisymmetry."""
        n = len(weights)
        c = [[[Fraction(0)] * n for _ in range(n)] for _ in range(n)]
        for (a, b), out in brackets.items():
            for k, val in out.items():
                c[a][b][k] = Fraction(val)
                c[b][a][k] = -Fraction(val)
        return cls(tuple(weights), c)

    @classmethod
    def abelian(cls, n: int, weight: int = 1):
        return cls.from_brackets([weight] * n, {})

    @classmethod
    def heisenberg(cls):
        return cls.from_brackets([1, 1, 2], {(0, 1): {2: 1}})

    @classmethod
    def engel(cls):
        return cls.from_brackets([1, 1, 2, 3], {(0, 1): {2: 1}, (0, 2): {3: 1}})

    @property
    def dim(self) -> int:
        return len(self.weights)

    @property
    def depth(self) -> int:
        return max(self.weights)

    @cached_property
    def _sparse(self) -> tuple[tuple[int, int, int, Fraction], ...]:
        return tuple((a, b, k, v)
                     for a, plane in enumerate(self.constants)
                     for b, row in enumerate(plane)
                     for k, v in enumerate(row) if v)

    def zero(self) -> AlgebraVector:
        return (Fraction(0),) * self.dim

    def basis(self, a: int) -> AlgebraVector:
        return tuple(Fraction(int(i == a)) for i in range(self.dim))

    def vector(self, coords: Sequence) -> AlgebraVector:
        v = tuple(Fraction(x) for x in coords)
        if len(v) != self.dim:
            raise DimensionMismatchError(f"expected {self.dim} coordinates, got {len(v)}")
        return v

    def degree_indices(self, i: int) -> list[int]:
        return [a for a, w in enumerate(self.weights) if w == i]

    def bracket(self, u: Sequence, v: Sequence) -> AlgebraVector:
        return bracket(self, u, v)

    def bch(self, u: Sequence, v: Sequence) -> AlgebraVector:
        return bch_product(self, u, v)

    def dilate(self, lam, v: Sequence) -> AlgebraVector:
        return dilate(self, lam, v)

    def to_dict(self) -> dict:
        brackets = {}
        for a, b, k, v in self._sparse:
            if a < b:
                brackets.setdefault(f"{a + 1},{b + 1}", {})[str(k + 1)] = str(v)
        return {"weights": list(self.weights), "brackets": brackets}

    @classmethod
    def from_dict(cls, data: Mapping) -> "GradedNilpotentLieAlgebra":
        """Inverse of :meth:`to_dict`; indices are 1-based, values ``"p/q"`` strings."""
        brackets = {}
        for key, out in data.get("brackets", {}).items():
            a, b = (int(s) - 1 for s in key.split(","))
            brackets[(a, b)] = {int(k) - 1: Fraction(v) for k, v in out.items()}
        return cls.from_brackets(data["weights"], brackets)


def _check_dim(alg: GradedNilpotentLieAlgebra, *vectors):
    for v in vectors:
        if len(v) != alg.dim:
            raise DimensionMismatchError(f"vector of length {len(v)} in a {alg.dim}-dimensional algebra")


def bracket(alg: GradedNilpotentLieAlgebra, u: Sequence, v: Sequence) -> AlgebraVector:
    _check_dim(alg, u, v)
    out = [Fraction(0)] * alg.dim
    for a, b, k, c in alg._sparse:
        if u[a] and v[b]:
            out[k] += c * u[a] * v[b]
    return tuple(out)


def _add(u, v):
    return tuple(a + b for a, b in zip(u, v))


def _scale(c, u):
    return tuple(c * a for a in u)


@lru_cache(maxsize=None)
def dynkin_terms(depth: int) -> tuple[tuple[Fraction, tuple[int, ...]], ...]:
    """Dynkin's series for ``log(e^X e^Y)`` up to bracket length ``depth``.

    Returns ``(coefficient, word)`` pairs; a word is a tuple of letters
    (0 for X, 1 for Y) standing for the right-nested bracket
    ``[w_1, [w_2, ... [w_{m-1}, w_m]]]``. Words that vanish identically
    (a repeated final letter) are dropped and equal words are merged.
    """
    blocks = [(r, s) for r in range(depth + 1) for s in range(depth + 1) if 0 < r + s <= depth]
    acc: dict[tuple[int, ...], Fraction] = {}

    def extend(prefix, length, n):
        if prefix:
            word = tuple(itertools.chain.from_iterable([0] * r + [1] * s for r, s in prefix))
            if len(word) == 1 or word[-1] != word[-2]:
                denom = length
                for r, s in prefix:
                    denom *= math.factorial(r) * math.factorial(s)
                coeff = Fraction((-1) ** (n - 1), n * denom)
                acc[word] = acc.get(word, Fraction(0)) + coeff
        for r, s in blocks:
            if length + r + s <= depth:
                extend(prefix + [(r, s)], length + r + s, n + 1)

    extend([], 0, 0)
    return tuple((c, w) for w, c in sorted(acc.items()) if c)


def bch_product(alg: GradedNilpotentLieAlgebra, u: Sequence, v: Sequence) -> AlgebraVector:
    """``log(exp(u) exp(v))`` evaluated exactly; identity 0, inverse ``-u``."""
    _check_dim(alg, u, v)
    u = tuple(Fraction(x) for x in u)
    v = tuple(Fraction(x) for x in v)
    letters = (u, v)
    values: dict[tuple[int, ...], AlgebraVector] = {}

    def value(word):
        if word not in values:
            if len(word) == 1:
                values[word] = letters[word[0]]
            else:
                tail = value(word[1:])
                values[word] = bracket(alg, letters[word[0]], tail) if any(tail) else tail
        return values[word]

    out = alg.zero()
    for coeff, word in dynkin_terms(alg.depth):
        w = value(word)
        if any(w):
            out = _add(out, _scale(coeff, w))
    return out


def bch_inverse(alg: GradedNilpotentLieAlgebra, u: Sequence) -> AlgebraVector:
    return tuple(-Fraction(x) for x in u)


def dilate(alg: GradedNilpotentLieAlgebra, lam, v: Sequence) -> AlgebraVector:
    """Scale coordinate ``a`` by ``lam ** weight[a]``."""
    _check_dim(alg, v)
    lam = Fraction(lam)
    return tuple(Fraction(x) * lam ** w for x, w in zip(v, alg.weights))


def verify_algebra(alg: GradedNilpotentLieAlgebra) -> Report:
    """Exact check of antisymmetry, Jacobi, gradedness and nilpotency.

    Witnesses are 1-based index tuples.
    """
    n = alg.dim
    c = alg.constants
    report = Report("graded nilpotent Lie algebra axioms")

    witness = next(((a + 1, b + 1, k + 1) for a in range(n) for b in range(n) for k in range(n)
                    if c[a][b][k] != -c[b][a][k]), None)
    report.add("antisymmetry", witness is None, witness)

    witness = next(((a + 1, b + 1, k + 1) for a in range(n) for b in range(n) for k in range(n)
                    if c[a][b][k] and alg.weights[k] != alg.weights[a] + alg.weights[b]), None)
    report.add("gradedness", witness is None, witness)

    witness = None
    basis = [alg.basis(a) for a in range(n)]
    for x, y, z in itertools.product(range(n), repeat=3):
        X, Y, Z = basis[x], basis[y], basis[z]
        total = _add(_add(bracket(alg, X, bracket(alg, Y, Z)),
                          bracket(alg, Y, bracket(alg, Z, X))),
                     bracket(alg, Z, bracket(alg, X, Y)))
        if any(total):
            witness = (x + 1, y + 1, z + 1)
            break
    report.add("jacobi", witness is None, witness)

    # every right-nested bracket of N + 1 basis elements must vanish
    witness = None
    frontier = [((a,), basis[a]) for a in range(n)]
    for _ in range(alg.depth):
        frontier = [((a,) + word, nested) for word, inner in frontier for a in range(n)
                    for nested in [bracket(alg, basis[a], inner)] if any(nested)]
    if frontier:
        witness = tuple(a + 1 for a in frontier[0][0])
    report.add("nilpotency", witness is None, witness,
               detail=f"brackets of length {alg.depth + 1} vanish")
    return report
