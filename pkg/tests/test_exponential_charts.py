from fractions import Fraction as Fr

import numpy as np
import pytest
import sympy as sp
from scipy.integrate import solve_ivp

from tangent_groupoid.exponential_charts import (
    ChartDomain, DomainError, GradedConnection, NotComposableError, NotExactError, Osculating, Pair,
    chart_log, chart_log_many, coordinate_christoffels, deformation_limit_check, exact_chart_log,
    exact_global_chart, exp_geodesic, global_chart, global_chart_many, groupoid_exp,
    injectivity_probe, multiply, validate_graded_connection,
)
from tangent_groupoid.filtration import FilteredChart, canonical_splitting
from tangent_groupoid.graded_algebra import GradedNilpotentLieAlgebra, bch_product

HEIS = GradedNilpotentLieAlgebra.heisenberg()


@pytest.fixture(scope="module")
def plane():
    return FilteredChart.from_strings(["x", "y"], [["1", "0"], ["0", "1"]], [1, 1], 1)


@pytest.fixture(scope="module")
def anharmonic(plane):
    # x'' = -x^3 (y')^2: oscillation with amplitude-dependent period
    return GradedConnection(plane, {(1, 1, 0): "x^3"}, "anharmonic")


def heisenberg_exp_symbolic(x0, W):
    """Flow of W_1 X1 + W_2 X2 + W_3 X3 for the left-invariant Heisenberg frame, solved by sympy."""
    s = sp.Symbol("s")
    a, b, c = W
    xs, ys = x0[0] + a * s, x0[1] + b * s
    z = x0[2] + sp.integrate(-a * ys / 2 + b * xs / 2 + c, (s, 0, s))
    return [sp.simplify(e.subs(s, 1)) for e in (xs, ys, z)]


def test_product_convention_symbolic_oracle():
    t = sp.Symbol("t", positive=True)
    x = [sp.Rational(1, 3), sp.Rational(-1, 2), 2]
    v = [1, sp.Rational(1, 2), sp.Rational(1, 3)]
    w = [sp.Rational(-1, 2), 2, 1]
    dil = lambda u: [u[0] * t, u[1] * t, u[2] * t ** 2]
    y = heisenberg_exp_symbolic(x, dil(w))
    z = heisenberg_exp_symbolic(y, dil(v))
    u = sp.symbols("u1:4")
    sol = sp.solve([sp.expand(a - b) for a, b in zip(heisenberg_exp_symbolic(x, dil(u)), z)], u, dict=True)[0]
    u_t = [sp.simplify(sol[k]) for k in u]
    assert all(sp.diff(c, t) == 0 for c in u_t)  # exact in t
    as_fr = lambda c: Fr(int(sp.fraction(c)[0]), int(sp.fraction(c)[1]))
    u_const = tuple(as_fr(c) for c in u_t)
    vq, wq = [as_fr(sp.nsimplify(c)) for c in v], [as_fr(sp.nsimplify(c)) for c in w]
    assert u_const == bch_product(HEIS, wq, vq)
    assert u_const != bch_product(HEIS, vq, wq)
    # the library's multiply realises the same orientation
    prod = multiply(Osculating(tuple(x), tuple(vq)), Osculating(tuple(x), tuple(wq)), HEIS)
    assert prod.v == u_const


def test_validate_graded_connection(heisenberg):
    chart = heisenberg.chart
    assert validate_graded_connection(GradedConnection.flat(chart)).passed
    bad = validate_graded_connection(GradedConnection(chart, {(0, 2, 0): "1"}))
    assert not bad.passed and bad.check("graded").witness == {"indices": [[1, 3, 1]]}
    assert validate_graded_connection(GradedConnection(chart, {(0, 0, 1): "z"})).passed


def test_exp_basic_cases(plane, heisenberg):
    flat = GradedConnection.flat(plane)
    psi = canonical_splitting(plane)
    x, v = (Fr(1, 3), -2), (Fr(1, 2), Fr(5, 4))
    assert np.array_equal(exp_geodesic(flat, psi, x, (0, 0)), np.array([1 / 3, -2.0]))
    assert np.allclose(exp_geodesic(flat, psi, x, v), [1 / 3 + 0.5, -2 + 1.25], atol=1e-15, rtol=0)
    g = groupoid_exp(flat, psi, x, v)
    assert isinstance(g, Pair) and g.t == 1 and g.source == (1 / 3, -2.0)
    assert groupoid_exp(flat, psi, x, (0, 0)).range == g.source


def test_global_chart_examples(heisenberg):
    conn, psi = heisenberg.connection("flat"), heisenberg.splitting()
    g = global_chart(conn, psi, (0, 0, 0), (0, 0, 1), 0.5)
    assert np.allclose(g.range, (0, 0, 0.25), atol=1e-15) and g.source == (0, 0, 0) and g.t == 0.5
    assert exact_global_chart(conn, psi, (0, 0, 0), (0, 0, 1), Fr(1, 2)).range == (0, 0, Fr(1, 4))
    for c in (conn, heisenberg.connection("curved")):
        o = global_chart(c, psi, (1, 2, 3), (4, 5, 6), 0)
        assert isinstance(o, Osculating) and o.base == (1, 2, 3) and o.v == (4, 5, 6)


@pytest.mark.parametrize("name", ["heisenberg3", "abelian-3"])
def test_flat_closed_form(name):
    from tangent_groupoid.manifest import bundled
    m = bundled(name)
    chart, conn, psi = m.chart, m.connection("flat"), m.splitting()
    rng = np.random.default_rng(4)
    X = rng.uniform(-2, 2, (40, chart.dim))
    V = rng.uniform(-1, 1, (40, chart.dim))
    T = rng.uniform(-1, 1, 40)
    Y = global_chart_many(conn, psi, X, V, T, ChartDomain(radius=8))
    for x, v, t, y in zip(X, V, T, Y):
        F = np.array([[float(c) for c in row] for row in chart.frame_matrix([Fr(c) for c in x])])
        closed = x + F @ (v * t ** np.array(chart.orders))
        assert np.max(np.abs(y - closed)) <= 1e-12


def test_flat_chart_matches_exact_flow_when_not_affine(engel, twisted):
    for m in (engel, twisted):
        conn, psi = m.connection("flat"), m.splitting()
        x, v, t = m.run["point"], m.run["vector"], Fr(3, 4)
        exact = exact_global_chart(conn, psi, x, v, t).range
        num = global_chart(conn, psi, x, v, float(t), ChartDomain(radius=8)).range
        assert max(abs(float(a) - b) for a, b in zip(exact, num)) <= 1e-12


def test_exact_route_needs_triangular_flat_data(heisenberg):
    with pytest.raises(NotExactError):
        exact_global_chart(heisenberg.connection("curved"), heisenberg.splitting(), (0, 0, 0), (1, 0, 0), 1)


def test_curved_step_halving(heisenberg):
    conn, psi = heisenberg.connection("curved"), heisenberg.splitting("sheared")
    ctrl = ChartDomain(radius=0.5)
    rng = np.random.default_rng(9)
    X, V = rng.uniform(-1, 1, (30, 3)), rng.uniform(-0.5, 0.5, (30, 3))
    T = rng.uniform(0.25, 1, 30)
    a = global_chart_many(conn, psi, X, V, T, ctrl)
    b = global_chart_many(conn, psi, X, V, T, ctrl.refined())
    assert np.max(np.abs(a - b) / np.maximum(1, np.abs(b))) <= 1e-10


def test_frame_form_agrees_with_coordinate_christoffels(heisenberg):
    conn, psi = heisenberg.connection("curved"), heisenberg.splitting("sheared")
    x0, v0 = np.array([0.2, -0.4, 0.7]), np.array([0.3, -0.2, 0.25])

    def rhs(_, state):
        x, xd = state[:3], state[3:]
        C = coordinate_christoffels(conn, psi, x)
        return np.concatenate([xd, -np.einsum("icj,c,j->i", C, xd, xd)])

    ref = solve_ivp(rhs, (0, 1), np.concatenate([x0, v0]), rtol=1e-12, atol=1e-13, method="DOP853").y[:3, -1]
    assert np.max(np.abs(exp_geodesic(conn, psi, x0, v0) - ref)) <= 1e-9


def test_chart_log_round_trips(heisenberg):
    conn, psi = heisenberg.connection("curved"), heisenberg.splitting("shifted")
    ctrl = ChartDomain(radius=0.5)
    rng = np.random.default_rng(1)
    X, V = rng.uniform(-1, 1, (50, 3)), rng.uniform(-0.5, 0.5, (50, 3))
    T = rng.choice([-1, 1], 50) * rng.uniform(0.25, 1, 50)
    Y = global_chart_many(conn, psi, X, V, T, ctrl)
    assert np.max(np.abs(chart_log_many(conn, psi, X, Y, T, ctrl) - V)) <= 1e-10
    # and the other composition
    assert np.max(np.abs(global_chart_many(conn, psi, X, chart_log_many(conn, psi, X, Y, T, ctrl), T, ctrl) - Y)) <= 1e-10
    x, v, t = chart_log(conn, psi, Pair((0.1, 0.2, 0.3), (0.1, 0.2, 0.3), 0.5), ctrl)
    assert np.max(np.abs(v)) <= 1e-14 and t == 0.5


def test_flat_log_closed_form(plane):
    conn, psi = GradedConnection.flat(plane), canonical_splitting(plane)
    _, v, _ = chart_log(conn, psi, Pair((1.5, 2.0), (1.0, 1.0), 0.5), ChartDomain(radius=4))
    assert np.allclose(v, [1.0, 2.0], atol=1e-14, rtol=0)
    assert exact_chart_log(conn, psi, Pair((Fr(3, 2), 2), (1, 1), Fr(1, 2)))[1] == (1, 2)


def test_domain_is_enforced(heisenberg):
    with pytest.raises(DomainError):
        global_chart(heisenberg.connection("flat"), heisenberg.splitting(), (0, 0, 0), (3, 0, 0), 1,
                     ChartDomain(radius=1))
    with pytest.raises(ValueError):
        ChartDomain(radius=0)


def test_multiply(heisenberg):
    g, h = Pair((3, 3), (2, 2), 0.5), Pair((2, 2), (1, 1), 0.5)
    assert multiply(g, h) == Pair((3, 3), (1, 1), 0.5)
    k = Pair((1, 1), (0, 0), 0.5)
    assert multiply(multiply(g, h), k) == multiply(g, multiply(h, k))
    with pytest.raises(NotComposableError):
        multiply(h, g)
    with pytest.raises(NotComposableError):
        multiply(g, Pair((2, 2), (1, 1), 0.25))
    with pytest.raises(NotComposableError):
        multiply(g, Osculating((2, 2), (0, 0)))
    base = (0, 0, 0)
    e1, e2 = Osculating(base, HEIS.basis(0)), Osculating(base, HEIS.basis(1))
    u = Osculating(base, (1, 2, 3))
    assert multiply(u, Osculating(base, HEIS.zero()), HEIS).v == u.v
    assert multiply(e1, e2, HEIS).v == (1, 1, Fr(-1, 2))
    assert multiply(e2, e1, HEIS).v == (1, 1, Fr(1, 2))
    assert multiply(multiply(e1, e2, HEIS), u, HEIS) == multiply(e1, multiply(e2, u, HEIS), HEIS)
    e1c = Osculating(base, HEIS.basis(0), heisenberg.chart)
    assert multiply(e1c, Osculating(base, HEIS.basis(1))).v == (1, 1, Fr(-1, 2))
    with pytest.raises(NotComposableError):
        multiply(e1, Osculating((1, 0, 0), HEIS.basis(1)), HEIS)


def test_deformation_examples(heisenberg, abelian, twisted):
    run = heisenberg.run
    for exact in (True, False):
        report = deformation_limit_check(heisenberg.connection(), heisenberg.splitting(), run["point"],
                                         run["vector"], run["second_vector"], run["t_sequence"],
                                         ChartDomain(radius=8), exact=exact)
        assert report.passed
        if exact:
            assert all(r["error"] == 0 for r in report.data["rows"])
        else:
            assert max(r["error"] for r in report.data["rows"]) <= 1e-10
    run = abelian.run
    report = deformation_limit_check(abelian.connection(), abelian.splitting(), run["point"], run["vector"],
                                     run["second_vector"], run["t_sequence"], ChartDomain(radius=8), exact=False)
    expected = [float(a + b) for a, b in zip(run["vector"], run["second_vector"])]
    assert all(np.max(np.abs(np.array(r["u"]) - expected)) <= 1e-12 for r in report.data["rows"])
    run = twisted.run
    report = deformation_limit_check(twisted.connection(), twisted.splitting(), run["point"], run["vector"],
                                     run["second_vector"], run["t_sequence"])
    assert report.passed and all(0.35 <= r <= 0.65 for r in report.data["ratios"])


def test_injectivity_probe_examples(plane, anharmonic, heisenberg):
    flat = GradedConnection.flat(plane)
    psi = canonical_splitting(plane)
    report = injectivity_probe(flat, psi, ChartDomain(radius=50), samples=2000, seed=1)
    assert report.passed and "no collision found at 2000 samples" in report.check("injective").detail
    curved = heisenberg.connection("curved")
    report = injectivity_probe(curved, heisenberg.splitting("shifted"), ChartDomain(radius=0.5), samples=10_000,
                               seed=3, base_points=heisenberg.chart.sample_points[:2])
    assert report.passed
    assert injectivity_probe(anharmonic, psi, ChartDomain(radius=1), samples=2000, seed=2).passed


def test_injectivity_probe_finds_collision(anharmonic, plane):
    psi = canonical_splitting(plane)
    report = injectivity_probe(anharmonic, psi, ChartDomain(radius=3), samples=3000, seed=0)
    check = report.check("injective")
    assert not check.passed
    x = check.witness["base"]
    v1, v2 = check.witness["v1"], check.witness["v2"]
    assert np.max(np.abs(np.subtract(v1, v2))) > 1e-3
    # independent confirmation with a finer integrator
    y1 = exp_geodesic(anharmonic, psi, x, v1, ChartDomain(radius=3, steps=4096))
    y2 = exp_geodesic(anharmonic, psi, x, v2, ChartDomain(radius=3, steps=4096))
    assert np.max(np.abs(y1 - y2)) <= 1e-8
