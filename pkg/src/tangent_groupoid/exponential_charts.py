"""Graded connections, geodesic exponentials and global exponential charts.

Numerics here are binary64. A geodesic of ``nabla^psi = psi nabla psi^{-1}`` is
integrated in the moving frame ``E_a = psi(sigma(X_a))``: with ``x' = G(x) w``
(``G`` has the ``E_a`` as columns) the geodesic equation reads
``w'_b = -sum_{c,a} x'_c Gamma_{ca}^b(x) w_a``, so no frame inverse is needed
along the trajectory.

For the flat graded connection on a unit upper triangular polynomial frame
the exponential is the time-one flow of a nilpotent polynomial vector field,
which Picard iteration computes exactly; the ``exact_*`` functions use that
route with rational arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .filtration import FilteredChart, Splitting, osculating_algebra_at
from .graded_algebra import bch_product
from .polyfields import FloatEvaluator, Polynomial, PolyVectorField, degree_cap
from .reports import Report

# Orientation of the osculating group law, pinned by the exact Heisenberg
# computation in tests/test_exponential_charts.py: the chart-pulled-back pair
# product (z, y) . (y, x) with y = exp_x(w), z = exp_y(v) tends to bch(w, v).
OSCULATING_CONVENTION = "multiply(g, h) = bch(h.v, g.v), i.e. log(exp(h.v) exp(g.v))"


class DomainError(ValueError):
    pass


class IntegrationError(ArithmeticError):
    pass


class ChartLogError(ArithmeticError):
    pass


class NotComposableError(ValueError):
    pass


class NotExactError(ValueError):
    """The exact route needs a flat connection and a unit triangular frame."""


@dataclass(frozen=True)
class ChartDomain:
    radius: float = 1.0
    steps: int = 256
    tol: float = 1e-12
    max_iter: int = 60
    max_steps: int = 1 << 16

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.steps < 1:
            raise ValueError("need at least one integration step")

    def refined(self, factor: int = 2) -> "ChartDomain":
        return ChartDomain(self.radius, self.steps * factor, self.tol, self.max_iter, self.max_steps)


@dataclass(frozen=True, eq=False)
class GradedConnection:
    """``nabla_{d/dx_c} e_a = sum_b Gamma[(c, a, b)](x) e_b`` in the graded frame (0-based keys)."""

    chart: FilteredChart
    christoffel: Mapping[tuple[int, int, int], Polynomial] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        n = self.chart.dim
        cleaned = {}
        for key, g in dict(self.christoffel).items():
            c, a, b = key
            if not all(0 <= i < n for i in key):
                raise ValueError(f"Christoffel index {key} out of range")
            if isinstance(g, str):
                g = self.chart.polynomial(g)
            elif not isinstance(g, Polynomial):
                g = Polynomial.constant(g, self.chart.coordinates)
            if g.variables != self.chart.coordinates:
                raise ValueError("Christoffel symbols must be polynomials in the chart coordinates")
            if not g.is_zero():
                cleaned[(c, a, b)] = g
        object.__setattr__(self, "christoffel", cleaned)

    @classmethod
    def flat(cls, chart: FilteredChart) -> "GradedConnection":
        return cls(chart, {}, "flat")

    @property
    def is_flat(self) -> bool:
        return not self.christoffel


def validate_graded_connection(conn: GradedConnection) -> Report:
    """Graded means block diagonal: ``Gamma_{ca}^b = 0`` unless ``o_a = o_b``."""
    orders = conn.chart.orders
    bad = sorted((c + 1, a + 1, b + 1) for (c, a, b) in conn.christoffel if orders[a] != orders[b])
    report = Report(f"graded connection {conn.name}".strip())
    report.add("graded", not bad, {"indices": [list(k) for k in bad]} if bad else None)
    return report


# -- groupoid elements --------------------------------------------------------


@dataclass(frozen=True)
class Pair:
    """Arrow ``x -> y`` of the pair groupoid ``M x M`` at a parameter ``t != 0``."""

    range: tuple
    source: tuple
    t: object

    def __post_init__(self):
        if self.t == 0:
            raise ValueError("pair arrows live at t != 0")


@dataclass(frozen=True)
class Osculating:
    """Element ``v`` of the osculating group at ``base``, living at ``t = 0``."""

    base: tuple
    v: tuple
    chart: FilteredChart | None = field(default=None, compare=False)

    @property
    def t(self):
        return 0


TangentGroupoidElement = Pair | Osculating


def multiply(g: TangentGroupoidElement, h: TangentGroupoidElement, algebra=None):
    """Groupoid product ``g . h`` (``h`` first, then ``g``)."""
    if isinstance(g, Pair) and isinstance(h, Pair):
        if g.t != h.t:
            raise NotComposableError(f"t mismatch: {g.t} vs {h.t}")
        if tuple(g.source) != tuple(h.range):
            raise NotComposableError("source of the left arrow differs from range of the right arrow")
        return Pair(g.range, h.source, g.t)
    if isinstance(g, Osculating) and isinstance(h, Osculating):
        if tuple(g.base) != tuple(h.base):
            raise NotComposableError("osculating elements over different base points")
        if algebra is None:
            chart = g.chart or h.chart
            if chart is None:
                raise ValueError("need the osculating algebra or a chart to multiply")
            algebra = osculating_algebra_at(chart, [Fraction(c) for c in g.base])
        return Osculating(g.base, bch_product(algebra, h.v, g.v), g.chart or h.chart)
    raise NotComposableError(f"t mismatch: {g.t} vs {h.t}")


# -- numeric geodesic integration --------------------------------------------


class _GeodesicSystem:
    def __init__(self, conn: GradedConnection, psi: Splitting):
        chart = conn.chart
        if psi.chart != chart:
            raise ValueError("connection and splitting live on different charts")
        n = self.n = chart.dim
        E = psi.fields
        self.G = FloatEvaluator([E[a].components[i] for i in range(n) for a in range(n)])
        self.flat = conn.is_flat
        self.gamma_index = sorted(conn.christoffel)
        self.Gam = FloatEvaluator([conn.christoffel[k] for k in self.gamma_index]) if not self.flat else None
        self.dG = FloatEvaluator([E[a].components[i].diff(chart.coordinates[c])
                                  for c in range(n) for i in range(n) for a in range(n)])

    def frame(self, x: np.ndarray) -> np.ndarray:
        return self.G(x).reshape(x.shape[:-1] + (self.n, self.n))

    def rhs(self, x, w, G=None):
        G = self.frame(x) if G is None else G
        xdot = np.matmul(G, w[..., None])[..., 0]
        wdot = np.zeros_like(w)
        if not self.flat:
            vals = self.Gam(x)
            for k, (c, a, b) in enumerate(self.gamma_index):
                wdot[..., b] -= xdot[..., c] * vals[..., k] * w[..., a]
        return xdot, wdot

    def integrate(self, x0: np.ndarray, w0: np.ndarray, steps: int) -> np.ndarray:
        """Classical RK4 on ``s in [0, 1]`` with ``steps`` fixed steps."""
        x, w = np.array(x0, dtype=float), np.array(w0, dtype=float)
        h = 1.0 / steps
        for step in range(steps):
            G = self.frame(x)
            if step % 8 == 0 and np.any(np.abs(np.linalg.det(G)) < 1e-13):
                raise IntegrationError("frame singular along trajectory")
            k1x, k1w = self.rhs(x, w, G)
            k2x, k2w = self.rhs(x + 0.5 * h * k1x, w + 0.5 * h * k1w)
            k3x, k3w = self.rhs(x + 0.5 * h * k2x, w + 0.5 * h * k2w)
            k4x, k4w = self.rhs(x + h * k3x, w + h * k3w)
            x = x + (h / 6) * (k1x + 2 * k2x + 2 * k3x + k4x)
            w = w + (h / 6) * (k1w + 2 * k2w + 2 * k3w + k4w)
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
                raise IntegrationError("geodesic left every bounded region")
        return x

    def coordinate_christoffels(self, x: np.ndarray) -> np.ndarray:
        """``C[i, c, j]``, coordinate symbols of ``nabla^psi``: ``G Gamma_c G^-1 - (d_c G) G^-1``."""
        n = self.n
        G = self.frame(x)
        Ginv = np.linalg.inv(G)
        Gam = np.zeros((n, n, n))  # Gam[c, b, a] = Gamma_{ca}^b
        if not self.flat:
            for val, (c, a, b) in zip(self.Gam(x), self.gamma_index):
                Gam[c, b, a] = val
        dG = self.dG(x).reshape(n, n, n)
        out = np.empty((n, n, n))
        for c in range(n):
            out[:, c, :] = G @ Gam[c] @ Ginv - dG[c] @ Ginv
        return out


@lru_cache(maxsize=64)
def _system(conn: GradedConnection, psi: Splitting) -> _GeodesicSystem:
    return _GeodesicSystem(conn, psi)


def coordinate_christoffels(conn: GradedConnection, psi: Splitting, x) -> np.ndarray:
    """Coordinate Christoffel symbols ``C[i, c, j]`` of ``nabla^psi`` at ``x``."""
    return _system(conn, psi).coordinate_christoffels(np.asarray(x, dtype=float))


def _as_float(x) -> np.ndarray:
    return np.array([float(v) for v in x])


def _dilation(chart: FilteredChart, t) -> np.ndarray:
    return np.array([float(t) ** o for o in chart.orders])


def _check_steps(ctrl: ChartDomain):
    if ctrl.steps > ctrl.max_steps:
        raise IntegrationError(f"step budget exceeded ({ctrl.steps} > {ctrl.max_steps})")


def exp_geodesic(conn: GradedConnection, psi: Splitting, x, v, ctrl: ChartDomain = ChartDomain()):
    """``exp_x(v)`` for the connection ``psi nabla psi^{-1}``; ``v`` in coordinates."""
    _check_steps(ctrl)
    system = _system(conn, psi)
    x = _as_float(x)
    w0 = np.linalg.solve(system.frame(x), _as_float(v))
    return system.integrate(x[None], w0[None], ctrl.steps)[0]


def groupoid_exp(conn: GradedConnection, psi: Splitting, x, v, ctrl: ChartDomain = ChartDomain()) -> Pair:
    """``(x, v) -> (exp_x(v), x)`` at ``t = 1``."""
    return Pair(tuple(exp_geodesic(conn, psi, x, v, ctrl)), tuple(_as_float(x)), 1)


def global_chart_many(conn: GradedConnection, psi: Splitting, X, V, T, ctrl: ChartDomain = ChartDomain()):
    """Ranges ``exp_x(psi delta_t v)`` for a batch of nonzero ``t``; shapes ``(B, n)``, ``(B, n)``, ``(B,)``."""
    _check_steps(ctrl)
    chart = conn.chart
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)
    W = np.asarray(V, dtype=float) * T[:, None] ** np.array(chart.orders)[None, :]
    if np.any(T == 0):
        raise ValueError("global_chart_many handles t != 0 only")
    if np.any(np.abs(W) > ctrl.radius):
        raise DomainError(f"dilated vector outside the chart domain (radius {ctrl.radius})")
    return _system(conn, psi).integrate(X, W, ctrl.steps)


def global_chart(conn: GradedConnection, psi: Splitting, x, v, t, ctrl: ChartDomain = ChartDomain()):
    """``(x, v, t) -> (exp(psi delta_t v), x, t)`` for ``t != 0`` and ``(x, v, 0)`` at ``t = 0``."""
    chart = conn.chart
    if len(v) != chart.dim or len(x) != chart.dim:
        raise ValueError(f"x and v need {chart.dim} entries")
    if t == 0:
        return Osculating(tuple(x), tuple(v), chart)
    y = global_chart_many(conn, psi, [_as_float(x)], [_as_float(v)], [float(t)], ctrl)[0]
    return Pair(tuple(y), tuple(_as_float(x)), t)


def _newton_log(system: _GeodesicSystem, X, Y, ctrl: ChartDomain) -> np.ndarray:
    """Initial frame velocities ``W`` with ``exp_X(W) = Y`` by damped Newton."""
    n = system.n
    W = np.linalg.solve(system.frame(X), (Y - X)[..., None])[..., 0]
    R = system.integrate(X, W, ctrl.steps) - Y
    res = np.max(np.abs(R), axis=1)
    eye = np.eye(n)
    for _ in range(ctrl.max_iter):
        active = res > ctrl.tol
        if not active.any():
            return W
        idx = np.flatnonzero(active)
        Xa, Wa, Ra = X[idx], W[idx], R[idx]
        h = 1e-7 * np.maximum(1.0, np.abs(Wa))
        Wp = (Wa[:, None, :] + h[:, None, :] * eye[None]).reshape(-1, n)
        Yp = system.integrate(np.repeat(Xa, n, axis=0), Wp, ctrl.steps).reshape(len(idx), n, n)
        J = (Yp - (Ra + Y[idx])[:, None, :]) / h[:, :, None]  # J[b, j, i] = d y_i / d w_j
        try:
            step = -np.linalg.solve(np.swapaxes(J, 1, 2), Ra[..., None])[..., 0]
        except np.linalg.LinAlgError:
            raise ChartLogError("singular Jacobian of the exponential map") from None
        lam = np.ones(len(idx))
        best_W, best_R = Wa.copy(), Ra.copy()
        best_res = res[idx].copy()
        pending = np.ones(len(idx), dtype=bool)
        for _ in range(12):
            trial = Wa + lam[:, None] * step
            Rt = system.integrate(Xa, trial, ctrl.steps) - Y[idx]
            rt = np.max(np.abs(Rt), axis=1)
            better = pending & (rt < best_res)
            best_W[better], best_R[better], best_res[better] = trial[better], Rt[better], rt[better]
            pending &= ~better
            if not pending.any():
                break
            lam[pending] *= 0.5
        if pending.all() and np.all(best_res > ctrl.tol):
            raise ChartLogError(f"Newton stalled at residual {best_res.max():.3e}")
        W[idx], R[idx], res[idx] = best_W, best_R, best_res
    if np.any(res > ctrl.tol):
        raise ChartLogError(f"no convergence within {ctrl.max_iter} iterations "
                            f"(residual {res.max():.3e})")
    return W


def chart_log_many(conn: GradedConnection, psi: Splitting, X, Y, T, ctrl: ChartDomain = ChartDomain()):
    """Inverse of :func:`global_chart_many`: graded vectors ``v`` for a batch of arrows."""
    _check_steps(ctrl)
    system = _system(conn, psi)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    T = np.asarray(T, dtype=float)
    W = _newton_log(system, X, Y, ctrl)
    if np.any(np.abs(W) > ctrl.radius * (1 + 1e-9)):
        raise DomainError("arrow lies outside the injectivity domain of the chart")
    return W / T[:, None] ** np.array(conn.chart.orders)[None, :]


def chart_log(conn: GradedConnection, psi: Splitting, g: Pair, ctrl: ChartDomain = ChartDomain()):
    """``(x, v, t)`` with ``global_chart(x, v, t) == g``."""
    if isinstance(g, Osculating):
        return tuple(g.base), tuple(g.v), 0
    v = chart_log_many(conn, psi, [_as_float(g.source)], [_as_float(g.range)], [float(g.t)], ctrl)[0]
    return tuple(_as_float(g.source)), tuple(v), g.t


# -- exact route ----------------------------------------------------------------


def triangular_frame(fields: Sequence[PolyVectorField]) -> bool:
    """``E_a = d_a + sum_{b > a} f_ab d_b`` with ``f_ab`` depending on ``x_1..x_{b-1}`` only."""
    for a, E in enumerate(fields):
        coords = E.coordinates
        for b, f in enumerate(E.components):
            if b < a and not f.is_zero():
                return False
            if b == a and f != 1:
                return False
            if b > a and any(f.degree_in(coords[c]) > 0 for c in range(b, len(coords))):
                return False
    return True


def exactly_integrable(conn: GradedConnection, psi: Splitting) -> bool:
    return conn.is_flat and triangular_frame(psi.fields)


def exact_flow(fields: Sequence[PolyVectorField], x0, w) -> tuple[Fraction, ...]:
    """Time-one flow of ``sum_a w_a E_a`` from ``x0`` by Picard iteration (terminates for triangular frames)."""
    n = len(fields)
    coords = fields[0].coordinates
    w = [Fraction(c) for c in w]
    x0 = [Fraction(c) for c in x0]
    with degree_cap(64):
        V = [sum((fields[a].components[i] * w[a] for a in range(n) if w[a]),
                 Polynomial.zero(coords)) for i in range(n)]
        traj = [Polynomial.constant(c, ("s",)) for c in x0]
        for _ in range(n + 2):
            sub = dict(zip(coords, traj))
            new = [Polynomial.constant(x0[i], ("s",)) + V[i].compose(sub).integrate("s")
                   for i in range(n)]
            if new == traj:
                return tuple(p({"s": 1}) for p in traj)
            traj = new
    raise NotExactError("Picard iteration did not terminate; the frame is not triangular")


def exact_exp(conn: GradedConnection, psi: Splitting, x, w) -> tuple[Fraction, ...]:
    """Exact ``exp_x`` of the frame vector with ``E``-components ``w``."""
    if not exactly_integrable(conn, psi):
        raise NotExactError("exact exponential needs a flat connection and a unit triangular frame")
    return exact_flow(psi.fields, x, w)


def exact_global_chart(conn: GradedConnection, psi: Splitting, x, v, t):
    t = Fraction(t)
    if t == 0:
        return Osculating(tuple(Fraction(c) for c in x), tuple(Fraction(c) for c in v), conn.chart)
    w = [Fraction(c) * t ** o for c, o in zip(v, conn.chart.orders)]
    return Pair(exact_exp(conn, psi, x, w), tuple(Fraction(c) for c in x), t)


def exact_chart_log(conn: GradedConnection, psi: Splitting, g):
    """Exact inverse of :func:`exact_global_chart`, solving for one frame component at a time."""
    if isinstance(g, Osculating):
        return tuple(g.base), tuple(g.v), 0
    if not exactly_integrable(conn, psi):
        raise NotExactError("exact logarithm needs a flat connection and a unit triangular frame")
    x = [Fraction(c) for c in g.source]
    y = [Fraction(c) for c in g.range]
    n = len(x)
    w = [Fraction(0)] * n
    # component b of the flow is x_b + w_b + (terms in w_1..w_{b-1})
    for b in range(n):
        reached = exact_flow(psi.fields, x, w)
        w[b] = y[b] - reached[b]
    t = Fraction(g.t)
    v = tuple(c / t ** o for c, o in zip(w, conn.chart.orders))
    return tuple(x), v, t


# -- deformation and injectivity checks ---------------------------------------


def deformation_limit_check(conn: GradedConnection, psi: Splitting, x, v, w, t_sequence,
                            ctrl: ChartDomain = ChartDomain(), exact: bool | None = None,
                            floor: float | None = None) -> Report:
    """Pull the pair-groupoid product back through the global chart and compare with the osculating product.

    For each ``t``: ``h = chart(x, w, t)``, ``g = chart(range(h), v, t)`` and
    ``u(t) = log_chart(g . h).v``. The limit candidate is the osculating
    product of ``v`` and ``w`` at ``x``; the report tabulates
    ``e(t) = max_a |u(t)_a - limit_a|`` and successive ratios ``e(t_{k+1}) / e(t_k)``.
    """
    chart = conn.chart
    if exact is None:
        exact = exactly_integrable(conn, psi) and all(
            isinstance(c, (int, Fraction)) for c in [*x, *v, *w, *t_sequence])
    xq = [Fraction(c) for c in x]
    alg = osculating_algebra_at(chart, xq)
    limit = multiply(Osculating(tuple(xq), tuple(Fraction(c) for c in v)),
                     Osculating(tuple(xq), tuple(Fraction(c) for c in w)), alg).v

    if floor is None:
        floor = 0.0 if exact else 1e-9
    report = Report("deformation limit", notes=[OSCULATING_CONVENTION])
    rows = []
    if exact:
        for t in t_sequence:
            h = exact_global_chart(conn, psi, x, w, t)
            g = exact_global_chart(conn, psi, h.range, v, t)
            u = exact_chart_log(conn, psi, multiply(g, h))[1]
            rows.append((Fraction(t), u, max(abs(a - b) for a, b in zip(u, limit))))
    else:
        T = np.array([float(t) for t in t_sequence])
        X = np.repeat(_as_float(x)[None], len(T), axis=0)
        Yh = global_chart_many(conn, psi, X, np.repeat(_as_float(w)[None], len(T), axis=0), T, ctrl)
        Yg = global_chart_many(conn, psi, Yh, np.repeat(_as_float(v)[None], len(T), axis=0), T, ctrl)
        for t, yh, yg in zip(t_sequence, Yh, Yg):
            multiply(Pair(tuple(yg), tuple(yh), t), Pair(tuple(yh), tuple(X[0]), t))
        U = chart_log_many(conn, psi, X, Yg, T, ctrl)
        lim = np.array([float(c) for c in limit])
        for t, u in zip(t_sequence, U):
            rows.append((t, tuple(float(c) for c in u), float(np.max(np.abs(u - lim)))))

    errors = [e for _, _, e in rows]
    ratios = [e2 / e1 if e1 else None for e1, e2 in zip(errors, errors[1:])]
    zero_slice = global_chart(conn, psi, x, v, 0)
    report.add("t0_slice_identity", tuple(zero_slice.base) == tuple(x) and tuple(zero_slice.v) == tuple(v))
    monotone = all(e2 <= e1 + floor for e1, e2 in zip(errors, errors[1:]))
    if all(e <= floor for e in errors):
        report.add("converges", True, detail=f"all errors within {floor:g}" if floor else
                   "pulled-back product equals the limit exactly")
    else:
        (t_prev, _, e_prev), (t_last, _, e_last) = rows[-2] if len(rows) > 1 else rows[-1], rows[-1]
        ok = monotone and (e_last <= floor or (
            e_prev > 0 and e_last > 0 and t_prev != t_last
            and math.log(e_last / e_prev) / math.log(float(t_last) / float(t_prev)) > 0.5))
        report.add("converges", ok, None if ok else {"errors": errors})
    report.data = {
        "exact": exact,
        "limit": list(limit),
        "rows": [{"t": t, "u": list(u), "error": e} for t, u, e in rows],
        "ratios": ratios,
    }
    return report


def injectivity_probe(conn: GradedConnection, psi: Splitting, ctrl: ChartDomain = ChartDomain(),
                      samples: int = 10_000, seed: int = 0, base_points=None, tol: float = 1e-9) -> Report:
    """Search for two graded vectors of the domain with the same arrow.

    Samples ``v`` uniformly in the cube of half-width ``ctrl.radius`` over a few
    base points. Pairs whose arrows are much closer than their inputs are
    refined by Newton's method towards an exact second preimage; a refined pair
    with arrows equal within ``tol`` and inputs apart is a collision. Passing
    is statistical evidence only.
    """
    chart = conn.chart
    n = chart.dim
    rng = np.random.default_rng(seed)
    if base_points is None:
        base_points = [chart.sample_points[0]]
    bases = np.array([[float(c) for c in p] for p in base_points])
    system = _system(conn, psi)
    report = Report("injectivity probe", notes=[f"seed {seed}", f"radius {ctrl.radius}"])

    per_base = max(2, samples // len(bases))
    for x in bases:
        W = rng.uniform(-ctrl.radius, ctrl.radius, size=(per_base, n))
        X = np.repeat(x[None], per_base, axis=0)
        try:
            Y = system.integrate(X, W, ctrl.steps)
        except IntegrationError as exc:
            report.add("well_defined", False, {"base": x.tolist()}, str(exc))
            return report
        tree = cKDTree(Y)
        scale = ctrl.radius * 0.05
        candidates = []
        for i, j in tree.query_pairs(scale, output_type="ndarray"):
            dy = np.max(np.abs(Y[i] - Y[j]))
            dw = np.max(np.abs(W[i] - W[j]))
            if dw > 4 * dy + 1e-6:
                candidates.append((dy / dw, i, j))
        if not candidates:
            continue
        candidates.sort()
        pairs = np.array([(i, j) for _, i, j in candidates[:128]])
        I, J = pairs[:, 0], pairs[:, 1]
        refine = ChartDomain(ctrl.radius, ctrl.steps, tol, min(ctrl.max_iter, 20))
        found, ok = _newton_batch(system, X[I], Y[I], W[J], refine)
        distinct = ok & (np.max(np.abs(found - W[I]), axis=1) > 1e-6) \
            & (np.max(np.abs(found), axis=1) <= ctrl.radius)
        if distinct.any():
            k = int(np.flatnonzero(distinct)[0])
            report.add("injective", False, {
                "base": x.tolist(), "v1": W[I[k]].tolist(), "v2": found[k].tolist(),
                "arrow": Y[I[k]].tolist()})
            return report
    report.add("injective", True, detail=f"no collision found at {per_base * len(bases)} samples")
    return report


def _newton_batch(system: _GeodesicSystem, X, Y, W0, ctrl: ChartDomain):
    """Undamped Newton from given starting velocities; returns the iterates and a convergence mask."""
    n = system.n
    W = np.array(W0, dtype=float)
    eye = np.eye(n)
    live = np.ones(len(W), dtype=bool)
    done = np.zeros(len(W), dtype=bool)
    for _ in range(ctrl.max_iter):
        idx = np.flatnonzero(live & ~done)
        if not len(idx):
            break
        try:
            R = system.integrate(X[idx], W[idx], ctrl.steps) - Y[idx]
        except IntegrationError:
            live[idx] = False
            break
        res = np.max(np.abs(R), axis=1)
        done[idx[res <= ctrl.tol]] = True
        keep = res > ctrl.tol
        idx, R = idx[keep], R[keep]
        if not len(idx):
            break
        h = 1e-7 * np.maximum(1.0, np.abs(W[idx]))
        Wp = (W[idx][:, None, :] + h[:, None, :] * eye[None]).reshape(-1, n)
        Yp = system.integrate(np.repeat(X[idx], n, axis=0), Wp, ctrl.steps).reshape(len(idx), n, n)
        Jac = (Yp - (R + Y[idx])[:, None, :]) / h[:, :, None]
        with np.errstate(all="ignore"):
            dets = np.abs(np.linalg.det(Jac))
            good = dets > 1e-14
            step = np.zeros_like(R)
            if good.any():
                step[good] = np.linalg.solve(np.swapaxes(Jac[good], 1, 2), R[good][..., None])[..., 0]
        live[idx[~good]] = False
        W[idx] -= step
        live[idx[np.max(np.abs(W[idx]), axis=1) > 10 * ctrl.radius]] = False
    return W, done & live
