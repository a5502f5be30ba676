"""Command-line entry point: ``phi4zero {solve,scan,signmap,plot,oracle}``.

Exit codes: 0 success, 1 oracle deviation above ``--tol``, 2 bad flags or
unreadable input, 3 solver breakdown (Diverged/Degenerate) or, for
``oracle``, a solver run that did not converge. Output files go to ``--out``,
which defaults to ``$PHI4ZERO_OUTPUT_DIR`` or the current directory.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .diagnostics import classify_run, delta_infinity_proxy, sign_map, stability_scan
from .mapping import SweepConfig, SweepOrder
from .model import ClosureMode, GreenSequence
from .records import (
    CorruptFileError,
    read_record,
    read_trace_csv,
    record_from_result,
    write_record,
    write_scan_csv,
    write_signmap_csv,
    write_thresholds_csv,
    write_trace_csv,
)
from .series import (
    OracleError,
    first_inexact_order,
    oracle_compare,
    series_eval,
    series_solve,
    truncation_estimates,
)
from .solver import SolverConfig, Status, reconcile, run, two_step_run
from .svg import line_chart

__all__ = ["main", "build_parser", "OUTPUT_DIR_ENV"]

OUTPUT_DIR_ENV = "PHI4ZERO_OUTPUT_DIR"
DEFAULT_LAMBDAS = [round(0.01 * k, 2) for k in range(1, 11)]

log = logging.getLogger("phi4zero")


class UsageError(Exception):
    """Invalid input detected after parsing; maps to exit code 2."""


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_DIR_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _tag(lam: float, n_max: int) -> str:
    return f"lambda{lam!r}_nmax{n_max}"


def _solver_args(p: argparse.ArgumentParser, single: bool = True) -> None:
    if single:
        p.add_argument("--n-max", type=int, default=55)
    p.add_argument("--epsilon", type=float, default=1e-10, help="convergence tolerance epsilon_H")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--closure", choices=[c.value for c in ClosureMode], default="zero")
    p.add_argument("--sweep", choices=[s.value for s in SweepOrder], default="upward")
    p.add_argument("--freeze", action=argparse.BooleanOptionalAction, default=True)


def _base_config(args, lam: float, n_max: int) -> SolverConfig:
    try:
        return SolverConfig(
            lam=lam,
            n_max=n_max,
            epsilon_h=args.epsilon,
            max_iterations=args.max_iter,
            sweep=SweepConfig(args.sweep, args.closure),
            freeze=args.freeze,
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    from . import __version__

    ap = argparse.ArgumentParser(prog="phi4zero", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="iterate M* for one (lambda, n_max)")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    _solver_args(p)
    p.add_argument("--start", default="fundamental",
                   help="'fundamental' or a run-record JSON whose H_conv seeds the iteration")
    p.add_argument("--mode", choices=["run", "two-step", "warm-start"], default="run")
    p.add_argument("--trace", action=argparse.BooleanOptionalAction, default=True,
                   help="write the per-iteration trace CSV")
    p.add_argument("--trace-stride", type=int, default=1)
    p.add_argument("--name", default=None, help="file name stem (default derived from lambda and n_max)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("scan", help="stability scan over a (lambda, n_max) grid")
    p.add_argument("--lambdas", type=float, nargs="*", default=DEFAULT_LAMBDAS)
    p.add_argument("--n-max", type=int, nargs="*", default=[55])
    p.add_argument("--n-max-range", type=int, nargs=3, metavar=("START", "STOP", "STEP"),
                   help="inclusive n_max range; overrides --n-max")
    _solver_args(p, single=False)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--name", default="scan")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("signmap", help="sign validity map over (lambda, H^2)")
    p.add_argument("--lambdas", type=float, nargs="*", default=DEFAULT_LAMBDAS)
    p.add_argument("--h2", type=float, nargs="*", default=None, help="explicit H^2 values")
    p.add_argument("--h2-range", type=float, nargs=3, metavar=("LO", "HI", "COUNT"),
                   default=(0.99, 1.05, 25))
    p.add_argument("--n-max", type=int, default=55)
    p.add_argument("--name", default="signmap")
    p.set_defaults(func=cmd_signmap)

    p = sub.add_parser("plot", help="render a trace CSV as SVG")
    p.add_argument("--trace", required=True, type=Path)
    p.add_argument("--ratio", action="store_true", help="also render |H_nu / H_conv| curves")
    p.add_argument("--levels", type=int, nargs="*", default=None, help="subset of n to draw")
    p.add_argument("--name", default=None)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("oracle", help="compare a converged run with the power-series solution")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--order", type=int, required=True)
    _solver_args(p)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--name", default=None)
    p.set_defaults(func=cmd_oracle)
    return ap


def _load_start(source: str, lam: float, n_max: int) -> GreenSequence | None:
    if source == "fundamental":
        return None
    try:
        rec = read_record(source)
        return reconcile(rec.h_conv(), lam, n_max)
    except (OSError, CorruptFileError, ValueError) as exc:
        raise UsageError(f"cannot use start record {source!r}: {exc}") from exc


def cmd_solve(args) -> int:
    if args.trace_stride < 1:
        raise UsageError("--trace-stride must be >= 1")
    if args.mode == "warm-start" and args.start == "fundamental":
        raise UsageError("--mode warm-start needs --start RECORD.json")
    cfg = _base_config(args, args.lam, args.n_max)
    cfg = replace(cfg, start=_load_start(args.start, cfg.lam, cfg.n_max), trace_stride=args.trace_stride)
    result, trace = (two_step_run if args.mode == "two-step" else run)(cfg)
    cls = classify_run(trace)
    rec = record_from_result(result, cls.summary.value, mode=args.mode)
    rec.extra["classification_counts"] = {k.value: v for k, v in sorted(cls.counts().items())}
    rec.extra["delta_infinity_proxy"] = delta_infinity_proxy(result.delta_conv)

    out = _out_dir(args)
    stem = args.name or f"solve_{_tag(cfg.lam, cfg.n_max)}"
    path = write_record(rec, out / f"{stem}.json")
    if args.trace:
        write_trace_csv(trace, out / f"{stem}_trace.csv")
    print(f"{result.status.value} after {result.iterations_used} iterations; "
          f"H^2 = {result.h_conv[1]!r}; classification {cls.summary.value}")
    print(f"record: {path}")
    return 3 if result.status in (Status.DIVERGED, Status.DEGENERATE) else 0


def cmd_scan(args) -> int:
    if args.n_max_range:
        a, b, s = args.n_max_range
        if s <= 0:
            raise UsageError("--n-max-range STEP must be positive")
        n_maxes = list(range(a, b + 1, s))
    else:
        n_maxes = args.n_max
    if not args.lambdas or not n_maxes:
        raise UsageError("scan grids must be nonempty")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    base = _base_config(args, args.lambdas[0], 55)
    try:
        scan = stability_scan(args.lambdas, n_maxes, base, workers=args.workers)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    out = _out_dir(args)
    write_scan_csv(scan, out / f"{args.name}.csv")
    write_thresholds_csv(scan, out / f"{args.name}_thresholds.csv")
    for (lam, n_max), c in scan.cells.items():
        print(f"lambda={lam!r:<6} n_max={n_max:<4} {c.status:<13} {c.classification or '-':<26} "
              f"nu_max={c.max_nu_conv:<5} delta_max={c.max_delta_conv:.6g}")
    for lam, thr in scan.thresholds.items():
        print(f"threshold lambda={lam!r}: {thr if thr is not None else 'none in grid'}")
    return 0


def cmd_signmap(args) -> int:
    if args.h2 is not None:
        h2 = args.h2
    else:
        lo, hi, count = args.h2_range
        if count != int(count) or count < 1:
            raise UsageError("--h2-range COUNT must be a positive integer")
        h2 = np.linspace(lo, hi, int(count)).tolist()
    if not args.lambdas or not h2:
        raise UsageError("sign map grids must be nonempty")
    try:
        cells = sign_map(args.lambdas, h2, args.n_max)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    out = _out_dir(args)
    path = write_signmap_csv(cells, out / f"{args.name}.csv")
    valid = sum(c.result == "valid" for c in cells)
    print(f"{valid}/{len(cells)} cells valid through n_max={args.n_max}; map: {path}")
    return 0


def cmd_plot(args) -> int:
    try:
        table = read_trace_csv(args.trace)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    except CorruptFileError as exc:
        raise UsageError(str(exc)) from exc
    levels = list(table.levels) if args.levels is None else args.levels
    missing = [n for n in levels if n not in set(table.levels.tolist())]
    if missing:
        raise UsageError(f"levels {missing} not in trace")
    col = {int(n): k for k, n in enumerate(table.levels)}
    out = _out_dir(args)
    stem = args.name or args.trace.stem.removesuffix("_trace")

    curves = {f"n={n}": (table.nu, table.delta[:, col[n]]) for n in levels}
    path = out / f"{stem}_delta.svg"
    path.write_text(line_chart(curves, "delta_n over iterations", "iteration nu", "delta_n"),
                    encoding="utf-8")
    print(f"wrote {path}")

    if args.ratio:
        curves = {}
        for n in levels:
            h = table.h[:, col[n]]
            frozen = np.flatnonzero(table.frozen[:, col[n]])
            stop = frozen[0] if frozen.size else h.size - 1
            ref = h[stop]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.abs(h[: stop + 1] / ref) if ref != 0 else np.full(stop + 1, np.nan)
            curves[f"n={n}"] = (table.nu[: stop + 1], ratio)
        path = out / f"{stem}_ratio.svg"
        path.write_text(line_chart(curves, "|H_nu / H_conv|", "iteration nu", "ratio"), encoding="utf-8")
        print(f"wrote {path}")
    return 0


def cmd_oracle(args) -> int:
    if args.order < 1:
        raise UsageError("--order must be >= 1")
    if not args.tol > 0:
        raise UsageError("--tol must be positive")
    cfg = _base_config(args, args.lam, args.n_max)
    if args.order >= first_inexact_order(cfg.n_max):
        raise UsageError(f"--order must be below {first_inexact_order(cfg.n_max)} for n_max={cfg.n_max}")
    result, trace = run(cfg)
    out = _out_dir(args)
    stem = args.name or f"oracle_{_tag(cfg.lam, cfg.n_max)}_order{args.order}"
    rec = record_from_result(result, classify_run(trace).summary.value)
    if not result.converged:
        rec.extra["oracle"] = f"not compared: solver status {result.status.value}"
        write_record(rec, out / f"{stem}.json")
        print(f"solver did not converge ({result.status.value}); no comparison made", file=sys.stderr)
        return 3
    try:
        dev = oracle_compare(result, args.order)
    except OracleError as exc:
        raise UsageError(str(exc)) from exc
    series = series_solve(cfg.n_max, args.order)
    trunc = truncation_estimates(cfg.n_max, args.order, cfg.lam)

    rows = []
    failed = []
    for n, d in dev.items():
        compared = trunc[n] <= args.tol
        rows.append((n, result.h_conv[n], series_eval(series[n], cfg.lam), d, trunc[n], compared))
        if compared and d > args.tol:
            failed.append(n)
    if not any(r[5] for r in rows):
        raise UsageError(f"no component is resolved by the order-{args.order} series to "
                         f"--tol {args.tol:g}; raise --order or --tol")
    path = out / f"{stem}.csv"
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "solver", "series", "deviation", "truncation_estimate", "compared"])
        for n, s, o, d, t, c in rows:
            w.writerow([n, repr(float(s)), repr(float(o)), repr(float(d)), repr(float(t)), int(c)])
    rec.extra["oracle"] = {"order": args.order, "tol": args.tol, "failed_levels": failed,
                           "compared_levels": [r[0] for r in rows if r[5]]}
    write_record(rec, out / f"{stem}.json")
    for n, s, o, d, t, c in rows:
        if c:
            print(f"n={n:<3} solver={s!r:<24} series={o!r:<24} deviation={d:.3e}")
    skipped = sum(not r[5] for r in rows)
    if skipped:
        print(f"{skipped} components not resolved by the order-{args.order} series at tol {args.tol:g}")
    print("PASS" if not failed else f"FAIL at n={failed}")
    return 1 if failed else 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"phi4zero {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
