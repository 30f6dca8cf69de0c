"""Command-line front end: sweeps, experiments and machine-readable output.

Exit codes: 0 success, 1 a ``verify`` check failed, 2 invalid input,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import itertools
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

from . import acceptance, serialize
from .dimension import dim_truncated, dimension_report
from .errors import (
    DomainError,
    InadmissibleWordError,
    NoConformalMeasureError,
    NoInvariantMeasureError,
    NonConvergenceError,
)
from .measures import (
    conformal_measure,
    conformal_pressure,
    conformal_residual,
    density_ratio,
    invariant_measure,
    rho_integral,
    stationarity_residual,
    variational_value,
)
from .spectra import phase_transition_report, pressure_curve
from .stochastic import (
    WalkConfig,
    classify,
    null_column,
    null_column_literal_binomial,
    null_column_closed,
    partition_Z,
    recurrence_series,
    simulate_chain,
    simulate_interval,
)

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_NONCONVERGENCE = 0, 1, 2, 3
DEFAULT_GRID_CAP = 10_000

GRID_HELP = (
    "a number, a comma list, or start:stop:step (includes start, excludes stop; "
    "points within 1e-9 steps of stop are dropped as rounding)"
)


class UsageError(ValueError):
    pass


def parse_grid(text: str, cap: int = DEFAULT_GRID_CAP) -> list[float]:
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid {text!r} must be start:stop:step")
        start, stop, step = (float(x) for x in parts)
        if not step > 0 or not stop > start:
            raise UsageError(f"grid {text!r} needs step > 0 and stop > start")
        n = math.ceil((stop - start) / step - 1e-9)
        if n > cap:
            raise UsageError(f"grid {text!r} has {n} points, above the cap {cap}")
        values = [start + i * step for i in range(n)]
        return [round(v, 12) if step >= 1e-9 else v for v in values]
    values = [float(x) for x in text.split(",") if x.strip()]
    if not values:
        raise UsageError("empty grid")
    if len(values) > cap:
        raise UsageError(f"grid has {len(values)} points, above the cap {cap}")
    return values


def parse_int_list(text: str) -> list[int]:
    if ":" in text:
        a, b, s = (int(x) for x in text.split(":"))
        return list(range(a, b, s))
    return [int(x) for x in text.split(",") if x.strip()]


def parse_rational(text: str):
    """'1/2' or '0.5' -> Fraction when written as a ratio, float otherwise."""
    text = str(text).strip()
    if "/" in text:
        return Fraction(text)
    return float(text)


def _threads(args) -> int:
    env = os.environ.get("LAMBDA_THERMO_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    want = args.threads if getattr(args, "threads", None) else cap
    return max(1, min(want, cap))


def _sweep(fn, lams, ts, args):
    """Row-major (lambda outer, t inner) evaluation in a thread pool."""
    points = list(itertools.product(lams, ts))
    if len(points) > args.grid_cap:
        raise UsageError(f"sweep of {len(points)} points exceeds the cap {args.grid_cap}")
    n = min(_threads(args), len(points))
    if n <= 1:
        return [fn(lam, t) for lam, t in points]
    with ThreadPoolExecutor(n) as pool:
        return list(pool.map(lambda pt: fn(*pt), points))


def _grids(args):
    return parse_grid(args.lam, args.grid_cap), parse_grid(args.t, args.grid_cap)


# command bodies: each returns (results, csv_rows, warnings)


def cmd_pressure(args):
    lams, ts = _grids(args)
    Ks = parse_int_list(args.K_schedule)
    if any(K < 2 for K in Ks):
        raise UsageError("K-schedule entries must be >= 2")

    def point(lam, t):
        row = pressure_curve(lam, [t], Ks)[0]
        return {"lambda": lam, **row}

    rows = _sweep(point, lams, ts, args)
    csv_rows = []
    for r in rows:
        flat = {"lambda": r["lambda"], "t": r["t"], "P_closed": r["P_closed"]}
        flat.update({f"x_{K}": x for K, x in r["x_K"].items()})
        flat["envelope_ok"] = r["envelope_ok"]
        csv_rows.append(flat)
    results = {"points": rows}
    if args.phase:
        results["phase_transition"] = [phase_transition_report(lam) for lam in lams]
    return results, csv_rows, []


def _report_dict(r):
    return {
        "lambda": r.lam,
        "t0": r.t0,
        "left_first": r.left_first,
        "right_first": r.right_first,
        "left_second": r.left_second,
        "right_second": r.right_second,
        "expected_first": r.expected_first,
        "expected_right_second": r.expected_right_second,
        "consistent": r.consistent(),
    }


def cmd_conformal(args):
    lams, ts = _grids(args)

    def point(lam, t):
        P = conformal_pressure(lam, t)
        p = P if args.p is None else args.p
        m = conformal_measure(lam, t, p)
        return {
            "lambda": lam,
            "t": t,
            "p": p,
            "conformal_pressure": P,
            "measure": m.to_dict(args.masses),
            "residual": conformal_residual(m, lam, t, p, args.k_max),
        }

    rows = _sweep(point, lams, ts, args)
    csv_rows = [
        {"lambda": r["lambda"], "t": r["t"], "p": r["p"], "law": r["measure"]["law"], "k": k, "mass": m}
        for r in rows
        for k, m in enumerate(r["measure"]["masses"], start=1)
    ]
    return {"points": rows}, csv_rows, []


def cmd_invariant(args):
    lams, ts = _grids(args)

    def point(lam, t):
        m = invariant_measure(lam, t)
        v = variational_value(lam, t)
        return {
            "lambda": lam,
            "t": t,
            "measure": m.to_dict(args.masses),
            "density_ratio": [density_ratio(n, lam, t) for n in range(1, args.masses + 1)],
            "stationarity_residual": stationarity_residual(lam, t),
            "rho_integral": rho_integral(lam, t),
            "variational": {"entropy": v.entropy, "integral": v.integral, "sum": v.sum, "log_psi": v.log_psi},
        }

    rows = _sweep(point, lams, ts, args)
    csv_rows = [
        {"lambda": r["lambda"], "t": r["t"], "k": k, "mass": m, "density_ratio": d}
        for r in rows
        for k, (m, d) in enumerate(zip(r["measure"]["masses"], r["density_ratio"]), start=1)
    ]
    return {"points": rows}, csv_rows, []


def cmd_classify(args):
    lams, ts = _grids(args)

    def point(lam, t):
        c = classify(lam, t)
        return {
            "lambda": lam,
            "t": t,
            "class": c.regime,
            "certificates": {
                "lambda_t": c.q,
                "rho_integral_finite": c.rho_integral_finite,
                "drift_sign": c.drift_sign,
            },
        }

    rows = _sweep(point, lams, ts, args)
    csv_rows = [
        {"lambda": r["lambda"], "t": r["t"], "class": r["class"], **r["certificates"]} for r in rows
    ]
    return {"points": rows}, csv_rows, []


def cmd_simulate(args):
    initial = args.initial if args.initial == "uniform" else int(args.initial)
    cfg = WalkConfig(
        lam=float(args.lam),
        t=float(args.t),
        n_steps=args.steps,
        n_walkers=args.walkers,
        seed=args.seed,
        escape_threshold=args.threshold,
        initial_state=initial,
    )
    run = simulate_interval if args.mode == "interval" else simulate_chain
    warnings = []
    if args.mode == "interval" and float(args.t) != 1.0:
        warnings.append("the interval map realises the t = 1 chain only; --t is ignored")
    stats = run(cfg, threads=_threads(args))
    summary = stats.to_dict()
    csv_rows = [{"bin": label, "frequency": f, "stderr": e} for label, f, e in stats.histogram_rows()]
    return {"config": cfg.__dict__, "stats": summary}, csv_rows, warnings


def cmd_dimension(args):
    lams = parse_grid(args.lam, args.grid_cap)
    Ks = parse_int_list(args.K) if args.K else []

    def point(lam, _t):
        row = dimension_report(lam, args.method).to_dict()
        for K in Ks:
            row[f"dim_{K}"] = dim_truncated(lam, K)
        return row

    rows = _sweep(point, lams, [None], args)
    return {"points": rows}, rows, []


def cmd_partition(args):
    if args.null_column is not None:
        k = args.null_column
        col, closed, lit = null_column(k), null_column_closed(k), null_column_literal_binomial(k)
        rows = [
            {"i": i, "exact": a, "closed_form": b, "literal_binomial": c}
            for i, (a, b, c) in enumerate(zip(col, closed, lit), start=1)
        ]
        return {"k": k, "column": rows, "closed_form_matches": col == closed}, rows, []

    if args.q is not None:
        q = parse_rational(args.q)
        lam = t = None
    elif args.lam is not None:
        q = None
        lam = parse_rational(args.lam)
        t = int(args.t) if float(args.t).is_integer() else float(args.t)
        if isinstance(lam, Fraction) and isinstance(t, float):
            lam = float(lam)
    else:
        raise UsageError("give --q, or --lambda with --t")

    if args.series is not None:
        s = recurrence_series(lam, t, args.series, q=None if q is None else float(q))
        d = s.to_dict()
        rows = [
            {"n": n, "term": a, "partial_sum": b}
            for n, a, b in zip(d["n"], d["term"], d["partial_sum"])
        ]
        return d, rows, []

    rows = []
    for k in parse_int_list(args.k):
        z = partition_Z(k, args.e0, lam, t, q=q)
        rows.append({"k": k, "e0": args.e0, "Z": z, "Z_float": float(z)})
    return {"points": rows}, rows, []


def cmd_verify(args):
    only = parse_int_list(args.only) if args.only else None
    outcomes = acceptance.run(only, echo=lambda line: print(line, file=sys.stderr))
    failed = [o.number for o in outcomes if not o.passed]
    results = {"suite": args.suite, "passed": not failed, "failed": failed, "checks": outcomes}
    return results, [o.to_dict() for o in outcomes], []


COMMANDS = {
    "pressure": cmd_pressure,
    "conformal": cmd_conformal,
    "invariant": cmd_invariant,
    "classify": cmd_classify,
    "simulate": cmd_simulate,
    "dimension": cmd_dimension,
    "partition": cmd_partition,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lambda-thermo",
        description="Pressure, measures, recurrence and dimension for the maps F_lambda.",
        epilog=f"Grids: {GRID_HELP}. LAMBDA_THERMO_THREADS caps parallelism.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--output", "-o", help="write here instead of stdout")
        p.add_argument("--grid-cap", type=int, default=DEFAULT_GRID_CAP, help="largest allowed sweep")
        p.add_argument("--threads", type=int, help="worker threads (capped by LAMBDA_THERMO_THREADS)")
        return p

    def lam_t(p, t_default="1", lam_required=True):
        p.add_argument("--lambda", dest="lam", required=lam_required, help=f"lambda grid: {GRID_HELP}")
        p.add_argument("--t", "--t-grid", dest="t", default=t_default, help=f"t grid: {GRID_HELP}")

    p = add("pressure", "closed-form pressure and truncated leading eigenvalues")
    lam_t(p)
    p.add_argument("--K-schedule", default="8,32,128,512", help="truncation sizes, comma list")
    p.add_argument("--phase", action="store_true", help="add one-sided derivatives at t0")

    p = add("conformal", "(t, p)-conformal measure and its residual")
    lam_t(p)
    p.add_argument("--p", type=float, help="shift; defaults to the conformal pressure")
    p.add_argument("--masses", type=int, default=32)
    p.add_argument("--k-max", type=int, default=100)

    p = add("invariant", "invariant probability, variational value and density ratio")
    lam_t(p)
    p.add_argument("--masses", type=int, default=32)

    p = add("classify", "positive recurrent, null recurrent or transient")
    lam_t(p)

    p = add("simulate", "Monte Carlo of the state chain or of the interval map")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--walkers", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=int, default=50, help="escape threshold state")
    p.add_argument("--initial", default="1", help="starting state, or 'uniform'")
    p.add_argument("--mode", choices=("chain", "interval"), default="chain")

    p = add("dimension", "Hausdorff dimensions and truncated-set dimensions")
    p.add_argument("--lambda", dest="lam", required=True, help=f"lambda grid: {GRID_HELP}")
    p.add_argument("--method", choices=("closed_form", "root_find"), default="closed_form")
    p.add_argument("--K", help="truncation sizes for dim_truncated, comma list or a:b:s")

    p = add("partition", "local partition functions, null columns and recurrence series")
    p.add_argument("--q", help="lambda^t directly, e.g. 1/2 for exact rationals")
    p.add_argument("--lambda", dest="lam", help="lambda (a ratio such as 1/2 keeps it exact)")
    p.add_argument("--t", default="1")
    p.add_argument("--k", default="1:11:1", help="loop lengths, comma list or a:b:s")
    p.add_argument("--e0", type=int, default=1)
    p.add_argument("--null-column", type=int, metavar="K", help="exact first column of D^K")
    p.add_argument("--series", type=int, metavar="N", help="normalised series up to N")

    p = add("verify", "run the acceptance checks")
    p.add_argument("--suite", choices=("acceptance",), default="acceptance")
    p.add_argument("--only", help="check numbers, comma list")
    return parser


def _emit(text: str, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:  # downstream closed early, e.g. piped into head
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    spec = {k: v for k, v in vars(args).items() if k not in ("output",)}
    try:
        results, csv_rows, warnings = COMMANDS[args.command](args)
    except NonConvergenceError as exc:
        print(f"error: numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (
        UsageError,
        DomainError,
        InadmissibleWordError,
        NoConformalMeasureError,
        NoInvariantMeasureError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "pressure" and isinstance(results, dict) and "phase_transition" in results:
        results["phase_transition"] = [_report_dict(r) for r in results["phase_transition"]]
    if args.format == "csv":
        text = serialize.csv_text(csv_rows)
        if args.command == "simulate":
            summary = {k: v for k, v in results["stats"].items() if not isinstance(v, list)}
            text += "\n" + serialize.csv_text([{"key": k, "value": v} for k, v in summary.items()])
    else:
        envelope = serialize.make_envelope(args.command, spec, results, warnings)
        envelope["payload_sha256"] = serialize.payload_digest(envelope)
        text = serialize.dumps(envelope) + "\n"
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    _emit(text, args.output)
    if args.command == "verify" and not results["passed"]:
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
