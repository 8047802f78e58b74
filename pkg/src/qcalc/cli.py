"""``qcalc`` command line driver: runs one verification suite or integration and prints a JSON report."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from itertools import combinations_with_replacement
from pathlib import Path

import tomli

from . import clifford, covariant, dim1, forms, nilpotency
from .report import Report
from .scalar import CyclotomicField
from .symfun import PolyMap, parse_poly

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CONFIG = 0, 1, 2, 3


class ConfigParseError(ValueError):
    pass


class UsageError(ValueError):
    pass


# -- config helpers -----------------------------------------------------------


def load_config(path: str) -> dict:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from exc
    try:
        if p.suffix.lower() == ".json":
            return json.loads(raw)
        return tomli.loads(raw.decode())
    except (tomli.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigParseError(f"{path}: {exc}") from exc


def _index(key: str, rank: int, n: int) -> tuple:
    parts = [int(s) - 1 for s in str(key).replace(" ", "").split(",")]
    if len(parts) != rank or any(not 0 <= i < n for i in parts):
        raise ConfigParseError(f"bad index {key!r} (need {rank} entries in 1..{n})")
    return tuple(parts)


def _tensor(table: dict | None, rank: int, n: int) -> dict:
    out = {}
    for key, text in (table or {}).items():
        out[_index(key, rank, n)] = parse_poly(str(text), n, order=3)
    return out


def bundle_from_config(cfg: dict):
    """Return ``(bundle, chart)``; chart is None when the file gives none."""
    n = int(cfg["n"])
    bundle = covariant.ConnectionBundle(
        n, _tensor(cfg.get("gamma"), 3, n), _tensor(cfg.get("bcoef"), 3, n),
        _tensor(cfg.get("ccoef"), 4, n))
    chart = None
    if "chart" in cfg:
        ch = cfg["chart"]
        chart = PolyMap([parse_poly(s, n, order=3) for s in ch["forward"]],
                        [parse_poly(s, n, order=3) for s in ch["inverse"]])
    return bundle, chart


def connection_from_config(cfg: dict) -> clifford.CliffordConnection:
    p, N = int(cfg["p"]), int(cfg["N"])
    fld = CyclotomicField(N)
    comps = []
    for k in range(1, p + 1):
        terms = {}
        for exps, text in cfg.get(f"A{k}", []):
            terms[tuple(int(e) for e in exps)] = fld.parse(str(text))
        comps.append(clifford.CliffordElement(p, N, terms))
    return clifford.CliffordConnection(tuple(comps))


def _named_chart(name: str, n: int) -> PolyMap:
    if name == "identity":
        return PolyMap.identity(n)
    if name == "affine":
        matrix = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
        matrix[0][n - 1] += 2
        matrix[n - 1][0] += 3
        return PolyMap.affine(matrix, [1] + [0] * (n - 2) + [-1])
    if name == "shear":
        return PolyMap.shear(n, 1, 0, power=2)
    raise UsageError(f"unknown chart {name!r}")


# -- commands -----------------------------------------------------------------


def cmd_verify_nilpotency(a):
    return nilpotency.verify_dN_zero(a.N, a.n, a.trials, a.seed, a.degree)


def cmd_verify_conditions(a):
    return nilpotency.verify_l_conditions(a.N, a.n)


def cmd_dims(a):
    rep = Report("dims", {"n": a.n})
    enumerated = forms.basis_enumerate(a.n)
    formula = forms.module_dimension(a.n)
    rep.add("enumerated basis size equals (n^3 + 6n^2 + 5n)/3", len(enumerated) == formula,
            f"{len(enumerated)} != {formula}")
    rep.extra["dimension"] = formula
    rep.extra["basis"] = [forms.monomial_str(m) for m in enumerated]
    return rep


def _sympy_functions(exprs, names):
    import sympy

    syms = sympy.symbols(names)
    if not isinstance(syms, (list, tuple)):
        syms = (syms,)
    local = {str(s): s for s in syms}
    try:
        parsed = [sympy.sympify(str(e), locals=local) for e in exprs]
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigParseError(f"cannot parse expression: {exc}") from exc
    return syms, parsed


def cmd_dim1_length(a):
    import sympy

    gcfg = load_config(a.metric)
    ccfg = load_config(a.curve)
    try:
        rows = gcfg["g"]
        n = len(rows)
        coords = gcfg.get("coords") or [f"x{i + 1}" for i in range(n)]
        curve_exprs = ccfg["x"]
        param = ccfg.get("param", "t")
    except (KeyError, TypeError) as exc:
        raise ConfigParseError(f"missing key {exc}") from exc
    if len(curve_exprs) != n or any(len(r) != n for r in rows):
        raise ConfigParseError("metric and curve dimensions disagree")
    xs, gexprs = _sympy_functions([e for r in rows for e in r], coords)
    (t,), cexprs = _sympy_functions(curve_exprs, [param])
    metric = []
    for i in range(n):
        row = []
        for j in range(n):
            f = sympy.lambdify(xs, gexprs[i * n + j], "math")
            row.append(lambda x, f=f: float(f(*x)))
        metric.append(row)
    curve = [sympy.lambdify(t, e, "math") for e in cexprs]
    vel = [sympy.lambdify(t, sympy.diff(e, t), "math") for e in cexprs]
    curve = [lambda s, f=f: float(f(s)) for f in curve]
    vel = [lambda s, f=f: float(f(s)) for f in vel]
    rep = Report("dim1 length", {"metric": a.metric, "curve": a.curve, "from": a.start,
                                 "to": a.stop, "tol": a.tol})
    try:
        res = dim1.curve_length_detail(metric, curve, a.start, a.stop, velocity=vel, tol=a.tol)
    except dim1.NonPositiveMetric as exc:
        rep.add("metric positive-definite along the curve", False, str(exc))
        return rep
    rep.add("metric positive-definite along the curve", True)
    rep.extra.update(length=res.length, tolerance=res.tolerance, evaluations=res.evaluations)
    return rep


def cmd_clifford_verify(a):
    return clifford.verify_nilpotency_and_anticommutators(a.p, a.N)


def _connection(a):
    if a.connection:
        cfg = load_config(a.connection)
        try:
            conn = connection_from_config(cfg)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigParseError(f"bad connection file: {exc}") from exc
        return conn, {"connection": a.connection}
    if a.seed is None:
        raise UsageError("give --connection or --seed")
    return clifford.random_connection(a.p, a.N, a.seed), {"seed": a.seed}


def cmd_clifford_curvature(a):
    conn, src = _connection(a)
    rep = Report("clifford curvature", {"p": conn.p, "N": conn.N, **src})
    comps, shown = {}, {}
    for idx in combinations_with_replacement(range(conn.p), conn.N):
        label = "".join(str(i + 1) for i in idx)
        direct = clifford.curvature(conn, idx, "direct")
        formula = clifford.curvature(conn, idx, "formula")
        rep.add(f"Omega_{label}: direct equals formula", direct == formula,
                f"direct {direct}; formula {formula}")
        comps[label] = str(direct)
        shown[label] = str(clifford.displayed_curvature(conn, idx))
    rep.extra["curvature"] = comps
    rep.extra["curvature_over_multiplicities"] = shown
    return rep


def cmd_clifford_bianchi(a):
    conn, src = _connection(a)
    rep = Report("clifford bianchi", {"p": conn.p, "N": conn.N, **src})
    for idx in combinations_with_replacement(range(conn.p), conn.N + 1):
        rep.checks.extend(clifford.bianchi_check(conn, idx).checks)
    return rep


def _bundle(a, symmetric=False):
    if a.config:
        cfg = load_config(a.config)
        try:
            bundle, chart = bundle_from_config(cfg)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigParseError(f"bad bundle file: {exc}") from exc
        return bundle, chart, {"config": a.config}
    if a.seed is None or a.n is None:
        raise UsageError("give --config or both --n and --seed")
    bundle = covariant.random_bundle(a.seed, a.n, a.degree, symmetric=symmetric)
    return bundle, None, {"n": a.n, "seed": a.seed, "degree": a.degree}


def cmd_covariant_tensoriality(a):
    bundle, chart, src = _bundle(a)
    if chart is None:
        chart = _named_chart(a.chart, bundle.n)
        src["chart"] = a.chart
    rep = Report("covariant tensoriality", src)
    rep.checks.extend(covariant.verify_d3_expansion(bundle).checks)
    rep.checks.extend(covariant.verify_tensoriality(bundle, chart).checks)
    try:
        rep.checks.extend(covariant.torsion_and_reality(bundle).checks)
    except ValueError:
        rep.extra["torsion"] = "skipped: coefficients are not real"
    return rep


def cmd_covariant_riemann(a):
    bundle, _, src = _bundle(a, symmetric=True)
    rep = covariant.riemann_identification(bundle.gamma, bundle.n)
    rep.params.update(src)
    return rep


def cmd_geodesic_integrate(a):
    cfg = load_config(a.config)
    try:
        n = int(cfg["n"])
        coeffs = covariant.GeodesicCoefficients(
            n, _tensor(cfg.get("ef"), 3, n), _tensor(cfg.get("g3"), 4, n),
            _tensor(cfg.get("gamma"), 3, n))
        x0, v0, a0 = (list(map(float, cfg[k])) for k in ("x0", "v0", "a0"))
        span = [float(v) for v in cfg["lambda"]]
        step = float(cfg["step"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParseError(f"bad geodesic file: {exc}") from exc
    rep = Report("geodesic integrate", {"config": a.config})
    try:
        lams, states = covariant.geodesic3_integrate(coeffs, x0, v0, a0, span, step)
    except covariant.NonFiniteState as exc:
        rep.add("state stays finite", False, str(exc))
        return rep
    rep.add("state stays finite", True)
    if a.richardson:
        ratio = covariant.richardson_ratio(coeffs, x0, v0, a0, span, step)
        rep.add("step-halving error ratio in [12, 20]", 12 <= ratio <= 20, f"ratio {ratio}")
        rep.extra["richardson_ratio"] = ratio
    header = (["lambda"] + [f"x{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)]
              + [f"a{i + 1}" for i in range(n)])
    rep.extra["trajectory"] = {"columns": header,
                               "rows": [[float(l)] + [float(v) for v in s]
                                        for l, s in zip(lams, states)]}
    return rep


# -- plumbing -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcalc", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json",
                        help="csv applies to geodesic trajectories")
    top = parser.add_subparsers(dest="group", required=True)

    verify = top.add_parser("verify").add_subparsers(dest="action", required=True)
    p = verify.add_parser("nilpotency", parents=[common])
    p.add_argument("--N", type=int, required=True, choices=(3, 4))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--degree", type=int, default=4)
    p.set_defaults(func=cmd_verify_nilpotency)
    p = verify.add_parser("conditions", parents=[common])
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_verify_conditions)

    p = top.add_parser("dims", parents=[common])
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_dims)

    d1 = top.add_parser("dim1").add_subparsers(dest="action", required=True)
    p = d1.add_parser("length", parents=[common])
    p.add_argument("--metric", required=True)
    p.add_argument("--curve", required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_dim1_length)

    cl = top.add_parser("clifford").add_subparsers(dest="action", required=True)
    p = cl.add_parser("verify", parents=[common])
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.set_defaults(func=cmd_clifford_verify)
    for name, func in (("curvature", cmd_clifford_curvature), ("bianchi", cmd_clifford_bianchi)):
        p = cl.add_parser(name, parents=[common])
        p.add_argument("--p", type=int, default=2)
        p.add_argument("--N", type=int, default=2)
        p.add_argument("--connection")
        p.add_argument("--seed", type=int)
        p.set_defaults(func=func)

    cv = top.add_parser("covariant").add_subparsers(dest="action", required=True)
    for name, func in (("tensoriality", cmd_covariant_tensoriality),
                       ("riemann", cmd_covariant_riemann)):
        p = cv.add_parser(name, parents=[common])
        p.add_argument("--config")
        p.add_argument("--n", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--degree", type=int, default=1)
        if name == "tensoriality":
            p.add_argument("--chart", choices=("identity", "affine", "shear"), default="shear")
        p.set_defaults(func=func)

    geo = top.add_parser("geodesic").add_subparsers(dest="action", required=True)
    p = geo.add_parser("integrate", parents=[common])
    p.add_argument("--config", required=True)
    p.add_argument("--richardson", action="store_true",
                   help="also report the step-halving error ratio")
    p.set_defaults(func=cmd_geodesic_integrate)
    return parser


def run_report(rep: Report, command: str, elapsed_ms: float) -> dict:
    out = {
        "command": command,
        "params": rep.params,
        "checks": [{k: v for k, v in c.to_dict().items() if k in ("name", "status", "witness")}
                   for c in rep.checks],
        "timing_ms": round(elapsed_ms, 3),
    }
    out.update(rep.extra)
    return out


def _csv_trajectory(doc: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    traj = doc["trajectory"]
    w.writerow(traj["columns"])
    for row in traj["rows"]:
        w.writerow([repr(v) for v in row])
    return buf.getvalue()


def dispatch(argv=None) -> tuple[int, dict | None]:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (EXIT_USAGE if exc.code else EXIT_OK), None
    command = " ".join(x for x in (args.group, getattr(args, "action", None)) if x)
    t0 = time.perf_counter()
    try:
        rep = args.func(args)
    except ConfigParseError as exc:
        print(f"qcalc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG, None
    except UsageError as exc:
        print(f"qcalc: {exc}", file=sys.stderr)
        return EXIT_USAGE, None
    doc = run_report(rep, command, (time.perf_counter() - t0) * 1000)
    if args.format == "csv" and "trajectory" in doc:
        text = _csv_trajectory(doc)
    else:
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return (EXIT_OK if rep.passed else EXIT_FAIL), doc


def main(argv=None) -> int:
    code, _ = dispatch(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
