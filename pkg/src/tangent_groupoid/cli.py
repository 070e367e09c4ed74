"""Command line front end: ``tangent-groupoid {validate,osculate,bch,chart,deform,selftest}``.

Exit status is 0 when every check passes, 1 when a check fails and 2 on
usage or manifest errors.
"""

from __future__ import annotations

import argparse
import json
import random
import shlex
import sys
import time
from fractions import Fraction

import numpy as np

from . import sampling
from .exponential_charts import (
    ChartDomain, ChartLogError, DomainError, IntegrationError, OSCULATING_CONVENTION, Osculating,
    chart_log, chart_log_many, deformation_limit_check, exact_chart_log, exact_global_chart,
    exactly_integrable,
    global_chart, global_chart_many, validate_graded_connection,
)
from .filtration import SAMPLE_NOTE, SingularFrameError, osculating_algebra_at, validate_filtration
from .graded_algebra import GradedNilpotentLieAlgebra, bch_product, bracket, dilate, verify_algebra
from .manifest import BUNDLED_NAMES, Manifest, ManifestError, load_manifest
from .reports import Report, jsonable
from .tangent_algebroid import (
    algebroid_bracket, ev0H, membership_XH, osculating_bracket_at, phi_psi, phi_psi_inverse,
    transition_matrix,
)

PROG = "tangent-groupoid"


class UsageError(ValueError):
    pass


def parse_vector(text: str) -> list[Fraction]:
    try:
        return [Fraction(s.strip()) for s in text.split(",")]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot read {text!r} as comma-separated rationals") from None


def _dim_check(vec, n, what):
    if vec is not None and len(vec) != n:
        raise UsageError(f"{what} needs {n} entries, got {len(vec)}")
    return vec


def _point(args, m: Manifest):
    p = args.point if args.point is not None else m.run.get("point", [0] * m.chart.dim)
    return _dim_check([Fraction(c) for c in p], m.chart.dim, "--point")


def _vectors(args, m: Manifest, count: int):
    vecs = list(args.vector or [])
    defaults = [m.run.get("vector"), m.run.get("second_vector")]
    for d in defaults[len(vecs):count]:
        vecs.append(d if d is not None else [0] * m.chart.dim)
    if len(vecs) != count:
        raise UsageError(f"expected {count} --vector arguments, got {len(vecs)}")
    return [_dim_check([Fraction(c) for c in v], m.chart.dim, "--vector") for v in vecs]


def _domain(args, m: Manifest) -> ChartDomain:
    return m.domain(steps=args.steps, tol=args.tol, radius=args.radius)


# -- commands -------------------------------------------------------------------


def validation_report(m: Manifest, corrupt: str | None = None) -> Report:
    report = Report(f"validate {m.name}")
    filtration = validate_filtration(m.chart)
    report.extend(filtration, "filtration.")
    if not filtration.passed:
        return report
    bad = None
    for p in m.chart.sample_points:
        alg = corrupt_algebra(osculating_algebra_at(m.chart, p), corrupt)
        axioms = verify_algebra(alg)
        if not axioms.passed:
            bad = (p, axioms)
            break
    if bad is None:
        report.add("osculating_algebra_axioms", True,
                   detail=f"at {len(m.chart.sample_points)} sample points")
    else:
        for c in bad[1].failures():
            report.add(f"osculating_algebra_axioms.{c.name}", False,
                       {"point": list(bad[0]), "indices": c.witness})
    for name in sorted(m.connections):
        report.extend(validate_graded_connection(m.connections[name]), f"connection.{name}.")
    if SAMPLE_NOTE not in report.notes:
        report.notes.append(SAMPLE_NOTE)
    return report


def corrupt_algebra(alg: GradedNilpotentLieAlgebra, corrupt: str | None) -> GradedNilpotentLieAlgebra:
    """Fault injection for self-tests: ``jacobi`` adds ``[e_1, e_n] = e_1``."""
    if corrupt is None:
        return alg
    if corrupt != "jacobi":
        raise UsageError(f"unknown corruption {corrupt!r}")
    c = [[list(row) for row in plane] for plane in alg.constants]
    n = alg.dim
    c[0][n - 1][0] += 1
    c[n - 1][0][0] -= 1
    return GradedNilpotentLieAlgebra(alg.weights, c)


def cmd_validate(args, m: Manifest) -> Report:
    return validation_report(m)


def cmd_osculate(args, m: Manifest) -> Report:
    p = _point(args, m)
    report = Report(f"osculate {m.name}")
    alg = osculating_algebra_at(m.chart, p)
    report.extend(verify_algebra(alg), "axioms.")
    report.data = {"point": p, **alg.to_dict()}
    return report


def cmd_bch(args, m: Manifest) -> Report:
    p = _point(args, m)
    u, v = _vectors(args, m, 2)
    alg = osculating_algebra_at(m.chart, p)
    report = Report(f"bch {m.name}")
    report.extend(verify_algebra(alg), "axioms.")
    report.data = {"point": p, "u": u, "v": v, "product": list(bch_product(alg, u, v))}
    return report


def cmd_chart(args, m: Manifest) -> Report:
    x = _point(args, m)
    (v,) = _vectors(args, m, 1)
    t = args.t if args.t is not None else m.run.get("t", Fraction(1))
    conn, psi = m.connection(args.connection), m.splitting(args.splitting)
    ctrl = _domain(args, m)
    report = Report(f"chart {m.name}", notes=[f"connection {conn.name}", f"steps {ctrl.steps}"])
    data = {"point": x, "vector": v, "t": t}
    g = global_chart(conn, psi, x, v, float(t) if t else 0, ctrl)
    if isinstance(g, Osculating):
        data["osculating"] = {"base": list(g.base), "v": list(g.v)}
        report.add("t0_identity", list(g.base) == x and list(g.v) == v)
        report.data = data
        return report
    data["range"] = [float(c) for c in g.range]
    data["source"] = [float(c) for c in g.source]
    if exactly_integrable(conn, psi):
        exact = exact_global_chart(conn, psi, x, v, t)
        data["exact_range"] = list(exact.range)
        err = max(abs(float(a) - b) for a, b in zip(exact.range, g.range))
        scale = max(1.0, max(abs(float(a)) for a in exact.range))
        report.add("matches_exact_flow", err <= 1e-12 * scale, {"error": err} if err > 1e-12 * scale else None)
        back = exact_chart_log(conn, psi, exact)[1]
        report.add("exact_round_trip", list(back) == v)
    if args.roundtrip:
        back = chart_log(conn, psi, g, ctrl)[1]
        err = max(abs(a - float(b)) for a, b in zip(back, v))
        data["round_trip_error"] = err
        report.add("round_trip", err <= 1e-10, {"error": err} if err > 1e-10 else None)
    report.data = data
    return report


def cmd_deform(args, m: Manifest) -> Report:
    x = _point(args, m)
    v, w = _vectors(args, m, 2)
    ts = args.t_seq if args.t_seq is not None else m.run.get("t_sequence")
    if not ts or any(t == 0 for t in ts):
        raise UsageError("need a sequence of nonzero t values (--t-seq)")
    conn, psi = m.connection(args.connection), m.splitting(args.splitting)
    report = deformation_limit_check(conn, psi, x, v, w, ts, _domain(args, m),
                                     exact=False if args.numeric else None)
    report.title = f"deform {m.name}"
    return report


def cmd_selftest(args, m: Manifest | None) -> Report:
    seed = args.seed if args.seed is not None else 20240601
    report = Report("selftest", notes=[f"seed {seed}", OSCULATING_CONVENTION, SAMPLE_NOTE])
    names = [args.manifest] if args.manifest else list(BUNDLED_NAMES)
    for name in names:
        man = load_manifest(name)
        report.extend(selftest_manifest(man, seed, args.corrupt), f"{man.name}.")
    return report


def selftest_manifest(m: Manifest, seed: int, corrupt: str | None = None, trials: int = 10) -> Report:
    rng = random.Random(seed)
    chart = m.chart
    report = validation_report(m, corrupt)
    if not report.passed:
        return report
    n = chart.dim
    p = chart.sample_points[-1]
    alg = osculating_algebra_at(chart, p)

    def first_failure(pred, gen):
        for _ in range(trials):
            case = gen()
            if not pred(*case):
                return [list(c) if isinstance(c, tuple) else c for c in case]
        return None

    vec = lambda: sampling.vector(rng, n)
    lam = lambda: sampling.nonzero_rational(rng)
    checks = {
        "bch_associative": (lambda u, v, w: bch_product(alg, bch_product(alg, u, v), w)
                            == bch_product(alg, u, bch_product(alg, v, w)), lambda: (vec(), vec(), vec())),
        "bch_identity_inverse": (lambda u: bch_product(alg, u, alg.zero()) == u
                                 and not any(bch_product(alg, u, tuple(-c for c in u))), lambda: (vec(),)),
        "dilation_bracket": (lambda a, u, v: bracket(alg, dilate(alg, a, u), dilate(alg, a, v))
                             == dilate(alg, a, bracket(alg, u, v)), lambda: (lam(), vec(), vec())),
        "dilation_bch": (lambda a, u, v: bch_product(alg, dilate(alg, a, u), dilate(alg, a, v))
                         == dilate(alg, a, bch_product(alg, u, v)), lambda: (lam(), vec(), vec())),
    }
    for name, (pred, gen) in checks.items():
        w = first_failure(pred, gen)
        report.add(name, w is None, w)

    bad_closure = bad_morphism = bad_roundtrip = bad_transition = None
    for _ in range(trials // 2):
        psi = sampling.splitting(rng, chart)
        phi = sampling.splitting(rng, chart)
        Y1, Y2 = sampling.graded_section(rng, chart), sampling.graded_section(rng, chart)
        s1, s2 = phi_psi(psi, Y1), phi_psi(psi, Y2)
        if bad_roundtrip is None and phi_psi_inverse(psi, s1) != Y1:
            bad_roundtrip = {"section": Y1.to_strings()}
        b = algebroid_bracket(s1, s2)
        if bad_closure is None and not membership_XH(b):
            bad_closure = {"witness": membership_XH(b).witness}
        elif bad_morphism is None:
            lhs = ev0H(b).at(p)
            if lhs != osculating_bracket_at(chart, p, ev0H(s1), ev0H(s2)):
                bad_morphism = {"point": list(p), "value": list(lhs)}
        T = transition_matrix(psi, phi, p)
        at0 = [[e({"t": 0}) for e in row] for row in T]
        if bad_transition is None and at0 != [[int(i == j) for j in range(n)] for i in range(n)]:
            bad_transition = {"matrix_at_0": at0}
    report.add("phi_psi_round_trip", bad_roundtrip is None, bad_roundtrip)
    report.add("bracket_closure", bad_closure is None, bad_closure)
    report.add("ev0_morphism", bad_morphism is None, bad_morphism)
    report.add("transition_identity_at_0", bad_transition is None, bad_transition)

    conn, psi = m.connection("flat"), m.splitting("canonical")
    x = m.run.get("point", [0] * n)
    v = m.run.get("vector", [0] * n)
    g = global_chart(conn, psi, x, v, 0)
    report.add("chart_t0_identity", list(g.base) == list(x) and list(g.v) == list(v))
    if exactly_integrable(conn, psi):
        t = m.run.get("t", Fraction(1, 2))
        back = exact_chart_log(conn, psi, exact_global_chart(conn, psi, x, v, t))[1]
        report.add("chart_exact_round_trip", list(back) == list(v))
    nprng = np.random.default_rng(seed)
    for cname in sorted(set(m.connections) - {"flat"}):
        curved = m.connections[cname]
        ctrl = m.domain(radius=min(0.5, float(m.run.get("radius", 0.5))))
        X = nprng.uniform(-1, 1, (8, n))
        V = nprng.uniform(-ctrl.radius, ctrl.radius, (8, n))
        T = nprng.uniform(0.25, 1, 8)
        Y = global_chart_many(curved, psi, X, V, T, ctrl)
        halved = global_chart_many(curved, psi, X, V, T, ctrl.refined())
        rel = float(np.max(np.abs(Y - halved)) / max(1.0, np.max(np.abs(halved))))
        report.add(f"{cname}.step_halving", rel <= 1e-10, {"relative": rel} if rel > 1e-10 else None)
        err = float(np.max(np.abs(chart_log_many(curved, psi, X, Y, T, ctrl) - V)))
        report.add(f"{cname}.round_trip", err <= 1e-10, {"error": err} if err > 1e-10 else None)

    ts = m.run.get("t_sequence")
    if ts and "second_vector" in m.run:
        deform = deformation_limit_check(conn, psi, x, v, m.run["second_vector"], ts, m.domain())
        report.extend(deform, "deform.")
    return report


COMMANDS = {
    "validate": cmd_validate,
    "osculate": cmd_osculate,
    "bch": cmd_bch,
    "chart": cmd_chart,
    "deform": cmd_deform,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="manifest path or bundled name "
                        f"({', '.join(BUNDLED_NAMES)}, abelian-N)")
    common.add_argument("--point", type=parse_vector, help="comma-separated rationals")
    common.add_argument("--vector", type=parse_vector, action="append",
                        help="comma-separated rationals; repeat for a second vector")
    common.add_argument("--t", type=lambda s: parse_vector(s)[0], help="deformation parameter")
    common.add_argument("--t-seq", type=parse_vector, help="comma-separated nonzero t values")
    common.add_argument("--seed", type=int)
    common.add_argument("--steps", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--radius", type=float)
    common.add_argument("--connection")
    common.add_argument("--splitting")
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json")
    fmt.add_argument("--text", dest="fmt", action="store_const", const="text")
    common.add_argument("--timing", action="store_true", help="include wall-clock time")

    parser = argparse.ArgumentParser(prog=PROG, description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "chart":
            p.add_argument("--roundtrip", action="store_true", help="also invert the chart")
        if name == "deform":
            p.add_argument("--numeric", action="store_true", help="force the floating point pipeline")
        if name == "selftest":
            p.add_argument("--corrupt", choices=["jacobi"], help="inject a fault")
    return parser


def render(report: Report, fmt: str, extra: dict) -> str:
    if fmt == "json":
        return json.dumps({**report.to_dict(), **jsonable(extra)}, sort_keys=True, indent=2)
    lines = [str(report)]
    for key, value in sorted(report.data.items()):
        lines.append(f"  {key}: {json.dumps(jsonable(value), sort_keys=True)}")
    for key, value in sorted(extra.items()):
        lines.append(f"  {key}: {value}")
    return "\n".join(lines)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    fmt = args.fmt or "text"
    start = time.perf_counter()
    try:
        if args.command == "selftest":
            report = cmd_selftest(args, None)
        else:
            m = load_manifest(args.manifest or "heisenberg3")
            report = COMMANDS[args.command](args, m)
    except (UsageError, ManifestError, KeyError) as exc:
        print(f"{PROG}: error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return 2
    except (SingularFrameError, DomainError, ChartLogError, IntegrationError) as exc:
        report = Report(f"{args.command} failed")
        report.add(type(exc).__name__, False, detail=str(exc))
    extra = {"command": args.command}
    if args.seed is not None:
        extra["seed"] = args.seed
    if not report.passed:
        extra["reproduce"] = " ".join([PROG, *(shlex.quote(a) for a in argv)])
    if args.timing:
        extra["seconds"] = round(time.perf_counter() - start, 3)
    print(render(report, fmt, extra))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
