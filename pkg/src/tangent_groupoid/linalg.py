"""Small exact linear algebra over the rationals.

Matrices are lists of rows of :class:`fractions.Fraction`. Everything here is
dense Gaussian elimination; the matrices this package meets are at most a
handful of rows wide.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence


class SingularMatrixError(ArithmeticError):
    pass


def as_fraction_matrix(rows) -> list[list[Fraction]]:
    return [[Fraction(v) for v in row] for row in rows]


def identity(n: int) -> list[list[Fraction]]:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def matmul(A, B):
    n, m, p = len(A), len(B), len(B[0]) if B else 0
    return [[sum((A[i][k] * B[k][j] for k in range(m)), Fraction(0)) for j in range(p)]
            for i in range(n)]


def matvec(A, v):
    return [sum((a * x for a, x in zip(row, v)), Fraction(0)) for row in A]


def transpose(A):
    return [list(col) for col in zip(*A)]


def _eliminate(A, B):
    """Reduce ``A`` to the identity in place, applying the same row operations to ``B``."""
    n = len(A)
    for col in range(n):
        pivot = next((r for r in range(col, n) if A[r][col] != 0), None)
        if pivot is None:
            raise SingularMatrixError(f"matrix is singular (no pivot in column {col})")
        if pivot != col:
            A[col], A[pivot] = A[pivot], A[col]
            B[col], B[pivot] = B[pivot], B[col]
        inv = 1 / A[col][col]
        A[col] = [a * inv for a in A[col]]
        B[col] = [b * inv for b in B[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [a - f * c for a, c in zip(A[r], A[col])]
                B[r] = [b - f * c for b, c in zip(B[r], B[col])]


def solve(A: Sequence[Sequence], b: Sequence) -> list[Fraction]:
    """Unique solution of ``A x = b`` for square, invertible ``A``."""
    M = as_fraction_matrix(A)
    if len(M) != len(b) or any(len(row) != len(M) for row in M):
        raise ValueError("solve needs a square matrix and a matching right-hand side")
    rhs = [[Fraction(v)] for v in b]
    _eliminate(M, rhs)
    return [r[0] for r in rhs]


def inverse(A: Sequence[Sequence]) -> list[list[Fraction]]:
    M = as_fraction_matrix(A)
    inv = identity(len(M))
    _eliminate(M, inv)
    return inv


def det(A: Sequence[Sequence]) -> Fraction:
    M = as_fraction_matrix(A)
    n = len(M)
    d = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if M[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            M[col], M[pivot] = M[pivot], M[col]
            d = -d
        d *= M[col][col]
        for r in range(col + 1, n):
            if M[r][col] != 0:
                f = M[r][col] / M[col][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return d
