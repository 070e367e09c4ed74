import random
from fractions import Fraction as Fr

import pytest
from hypothesis import given, settings, strategies as st

from tangent_groupoid.graded_algebra import (
    DimensionMismatchError, GradedNilpotentLieAlgebra, bch_inverse, bch_product, bracket, dilate,
    dynkin_terms, verify_algebra,
)

HEIS = GradedNilpotentLieAlgebra.heisenberg()
ENGEL = GradedNilpotentLieAlgebra.engel()
# depth-4 filiform algebra: [e1, e_k] = e_{k+1}
FILIFORM = GradedNilpotentLieAlgebra.from_brackets([1, 1, 2, 3, 4], {(0, 1): {2: 1}, (0, 2): {3: 1}, (0, 3): {4: 1}})
ALGEBRAS = [HEIS, ENGEL, FILIFORM, GradedNilpotentLieAlgebra.abelian(3)]

rationals = st.fractions(min_value=-4, max_value=4, max_denominator=6)


def vectors(alg):
    return st.tuples(*[rationals] * alg.dim)


def e(alg, *coords):
    return alg.vector(coords)


def _matmul(A, B):
    n = len(A)
    return [[sum(A[i][k] * B[k][j] for k in range(n)) for j in range(n)] for i in range(n)]


def _nilpotent_exp(A):
    n = len(A)
    out = [[Fr(int(i == j)) for j in range(n)] for i in range(n)]
    term = [row[:] for row in out]
    for k in range(1, n):
        term = [[c / k for c in row] for row in _matmul(term, A)]
        out = [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(out, term)]
    return out


def _unipotent_log(M):
    n = len(M)
    N = [[M[i][j] - (i == j) for j in range(n)] for i in range(n)]
    out = [[Fr(0)] * n for _ in range(n)]
    power = [row[:] for row in N]
    for k in range(1, n):
        out = [[a + Fr((-1) ** (k + 1), k) * b for a, b in zip(r1, r2)] for r1, r2 in zip(out, power)]
        power = _matmul(power, N)
    return out


def _heisenberg_matrix(v):
    a, b, c = v
    return [[Fr(0), a, c], [Fr(0), Fr(0), b], [Fr(0), Fr(0), Fr(0)]]


def _bch_up_to_4(alg, X, Y):
    """Closed-form BCH through bracket length 4, exact for depth <= 4."""
    br = lambda u, v: bracket(alg, u, v)
    XY = br(X, Y)
    terms = [(1, X), (1, Y), (Fr(1, 2), XY), (Fr(1, 12), br(X, XY)), (Fr(-1, 12), br(Y, XY)),
             (Fr(-1, 24), br(Y, br(X, XY)))]
    return tuple(sum(c * v[i] for c, v in terms) for i in range(alg.dim))


def test_bracket_examples():
    assert bracket(HEIS, HEIS.basis(0), HEIS.basis(1)) == HEIS.basis(2)
    u = e(HEIS, 1, Fr(2, 3), 5)
    assert bracket(HEIS, u, u) == HEIS.zero()
    ab = GradedNilpotentLieAlgebra.abelian(3)
    assert bracket(ab, e(ab, 1, 2, 3), e(ab, 4, 5, 6)) == ab.zero()


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        bracket(HEIS, (1, 0), (0, 1, 0))
    with pytest.raises(DimensionMismatchError):
        bch_product(ENGEL, HEIS.basis(0), ENGEL.basis(0))


def test_bch_examples():
    assert bch_product(HEIS, HEIS.basis(0), HEIS.basis(1)) == (1, 1, Fr(1, 2))
    assert bch_product(ENGEL, ENGEL.basis(0), ENGEL.basis(1)) == (1, 1, Fr(1, 2), Fr(1, 12))
    u = e(ENGEL, 1, -2, Fr(1, 3), 4)
    assert bch_product(ENGEL, u, ENGEL.zero()) == u
    assert bch_product(ENGEL, u, bch_inverse(ENGEL, u)) == ENGEL.zero()


def test_dynkin_low_order_coefficients():
    terms = dict((w, c) for c, w in dynkin_terms(3))
    assert terms[(0,)] == 1 and terms[(1,)] == 1
    # the words XY and YX together contribute [X, Y] / 2
    assert terms[(0, 1)] - terms.get((1, 0), 0) == Fr(1, 2)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_bch_matches_matrix_oracle(data):
    u = data.draw(vectors(HEIS))
    v = data.draw(vectors(HEIS))
    prod = _matmul(_nilpotent_exp(_heisenberg_matrix(u)), _nilpotent_exp(_heisenberg_matrix(v)))
    L = _unipotent_log(prod)
    assert bch_product(HEIS, u, v) == (L[0][1], L[1][2], L[0][2])


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_bch_matches_closed_form_through_length_four(data):
    alg = data.draw(st.sampled_from([ENGEL, FILIFORM]))
    u, v = data.draw(vectors(alg)), data.draw(vectors(alg))
    assert bch_product(alg, u, v) == _bch_up_to_4(alg, u, v)


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_group_and_dilation_laws(data):
    alg = data.draw(st.sampled_from(ALGEBRAS))
    u, v, w = (data.draw(vectors(alg)) for _ in range(3))
    lam = data.draw(rationals.filter(bool))
    mu = data.draw(rationals.filter(bool))
    assert bch_product(alg, bch_product(alg, u, v), w) == bch_product(alg, u, bch_product(alg, v, w))
    assert dilate(alg, lam, dilate(alg, mu, v)) == dilate(alg, lam * mu, v)
    assert bracket(alg, dilate(alg, lam, u), dilate(alg, lam, v)) == dilate(alg, lam, bracket(alg, u, v))
    assert bch_product(alg, dilate(alg, lam, u), dilate(alg, lam, v)) == dilate(alg, lam, bch_product(alg, u, v))
    # beyond u + v + [u, v]/2 only weights >= 3 are touched
    rest = [a - b - c - d / 2 for a, b, c, d in zip(bch_product(alg, u, v), u, v, bracket(alg, u, v))]
    assert all(r == 0 for r, wt in zip(rest, alg.weights) if wt < 3)


def test_dilate_examples():
    v = e(HEIS, 2, 3, 5)
    assert dilate(HEIS, 1, v) == v
    assert dilate(HEIS, Fr(1, 2), v) == (1, Fr(3, 2), Fr(5, 4))
    assert dilate(HEIS, 0, v) == HEIS.zero()


def test_verify_algebra_passes_on_bundled():
    for alg in ALGEBRAS:
        assert verify_algebra(alg).passed


def test_gradedness_failure_witness():
    bad = GradedNilpotentLieAlgebra.from_brackets([1, 1, 1], {(0, 1): {2: 1}})
    report = verify_algebra(bad)
    assert not report.check("gradedness").passed
    assert report.check("gradedness").witness == (1, 2, 3)


def test_jacobi_failure_witness_is_genuine():
    # three generators, graded and antisymmetric, with [e1, [e2, e3]] = e7 but no compensating terms
    alg = GradedNilpotentLieAlgebra.from_brackets(
        [1, 1, 1, 2, 2, 2, 3],
        {(0, 1): {3: 1}, (0, 2): {4: 1}, (1, 2): {5: 1}, (0, 5): {6: 1}})
    report = verify_algebra(alg)
    assert report.check("gradedness").passed and report.check("antisymmetry").passed
    jac = report.check("jacobi")
    assert not jac.passed
    x, y, z = (alg.basis(i - 1) for i in jac.witness)
    br = lambda a, b: bracket(alg, a, b)
    total = [sum(t) for t in zip(br(x, br(y, z)), br(y, br(z, x)), br(z, br(x, y)))]
    assert any(total)


def test_nilpotency_failure_detected():
    # weights are not checked against brackets here, so a cycle e1 -> e2 -> e1 breaks nilpotency
    alg = GradedNilpotentLieAlgebra.from_brackets([1, 1, 2], {(0, 1): {1: 1}})
    assert not verify_algebra(alg).check("nilpotency").passed


def test_serialization_round_trip():
    for alg in ALGEBRAS:
        assert GradedNilpotentLieAlgebra.from_dict(alg.to_dict()) == alg


def test_bch_cost_stays_small():
    rng = random.Random(3)
    for _ in range(50):
        u = tuple(Fr(rng.randint(-9, 9), rng.randint(1, 9)) for _ in range(5))
        v = tuple(Fr(rng.randint(-9, 9), rng.randint(1, 9)) for _ in range(5))
        assert bch_product(FILIFORM, u, v) == _bch_up_to_4(FILIFORM, u, v)


def test_dynkin_words_have_bounded_length():
    for depth in range(1, 5):
        assert all(len(w) <= depth for _, w in dynkin_terms(depth))
        assert not any(len(w) > 1 and w[-1] == w[-2] for _, w in dynkin_terms(depth))
