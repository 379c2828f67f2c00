"""Benchmark command line: runs the bundled experiments and writes CSV.

Every experiment knob is a flag with defaults matching the full-scale study
setups, so desk-scale probes just dial the resolution down.  All runs are
deterministic: there is no randomness anywhere, and the output bytes do not
depend on the worker count.

Exit codes: 0 on success, 1 when solver lanes carry fatal status flags (the
run still completes and the CSV is written; the flags are summarised on
stderr), 2 on usage or I/O errors.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .lanes import STATUS_NAMES, STATUS_OK
from .runner import (
    WORK_PRECISION_FREQUENCIES,
    WORK_PRECISION_TOLERANCES,
    run_km_frequency_response,
    run_km_work_precision,
    run_lorenz_benchmark,
    run_micro_benchmark,
    run_valve_bifurcation,
)

MICRO_MODELS = ("intro", "intro-div", "intro-sin")


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: str, header: str, rows) -> None:
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise SystemExit(f"lanebench: cannot write {path!r}: {exc}") from None


def _int_list(text: str):
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")


def _float_list(text: str):
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _report_flags(result) -> int:
    bad = result.failed_lanes()
    if bad.size == 0:
        return 0
    counts = {}
    for code in result.status[bad]:
        counts[STATUS_NAMES[int(code)]] = counts.get(STATUS_NAMES[int(code)], 0) + 1
    summary = ", ".join(f"{name}: {cnt}" for name, cnt in sorted(counts.items()))
    print(f"lanebench: {bad.size} lane(s) flagged ({summary})", file=sys.stderr)
    return 1


def _cmd_lorenz_perf(args) -> int:
    rows = []
    status = 0
    for n in args.n_list:
        res = run_lorenz_benchmark(n, dt=args.dt, n_steps=args.steps,
                                   width=args.width, unroll=args.unroll,
                                   workers=args.workers, repetitions=args.repetitions)
        per_inst_us = res.runtime / n * 1e6
        rows.append((n, res.runtime, per_inst_us, args.width, args.unroll, args.workers))
        print(f"N={n}: {res.runtime:.6f} s  ({per_inst_us:.4f} us/instance)")
        status |= _report_flags(res)
    _write_csv(args.out, "N,runtime_seconds,runtime_per_instance_us,width,unroll,workers", rows)
    return status


def _cmd_km_response(args) -> int:
    res = run_km_frequency_response(args.n, tol=args.tol, n_transient=args.transient,
                                    n_record=args.record, stepper=args.stepper,
                                    width=args.width, unroll=args.unroll,
                                    workers=args.workers)
    rows = []
    y1_max = res.observables["y1_max"]
    for i in range(res.n):
        for r in range(y1_max.shape[1]):
            rows.append((res.sweep[i], r, y1_max[i, r], res.n_rhs_evals[i]))
    _write_csv(args.out, "f1_hz,phase_index,y1_max,n_f_total", rows)
    ok = np.isfinite(y1_max[:, -1])
    print(f"{res.n} instances, {y1_max.shape[1]} recorded phases each, "
          f"{res.runtime:.3f} s; peak response {np.nanmax(y1_max):.4f}")
    del ok
    return _report_flags(res)


def _cmd_km_work_precision(args) -> int:
    rows_dicts = run_km_work_precision(frequencies=args.freqs, tolerances=args.tols,
                                       steppers=args.steppers)
    rows = [(r["f1_hz"], r["tolerance"], r["stepper"], r["e_abs"], r["n_f_total"])
            for r in rows_dicts]
    _write_csv(args.out, "f1_hz,tolerance,stepper,E_abs,n_f_total", rows)
    print(f"{len(rows)} rows ({len(args.freqs)} frequencies x {len(args.tols)} tolerances "
          f"x {len(args.steppers)} steppers)")
    return 0


def _cmd_valve_bifurcation(args) -> int:
    res = run_valve_bifurcation(args.n, tol=args.tol, impact_tol=args.impact_tol,
                                n_transient=args.transient, n_record=args.record,
                                stepper=args.stepper, width=args.width,
                                unroll=args.unroll, workers=args.workers)
    rows = []
    y1_max = res.observables["y1_max"]
    y1_min = res.observables["y1_min"]
    impacts = res.observables["impacts"]
    for i in range(res.n):
        for r in range(y1_max.shape[1]):
            rows.append((res.sweep[i], r, y1_max[i, r], y1_min[i, r], int(impacts[i, r])))
    _write_csv(args.out, "q,phase_index,y1_max,y1_min,n_impacts", rows)
    impacting = int(np.sum(np.nanmin(y1_min, axis=1) <= args.impact_tol))
    print(f"{res.n} instances, {y1_max.shape[1]} recorded phases each, "
          f"{res.runtime:.3f} s; {impacting} impacting instances")
    return _report_flags(res)


def _cmd_micro(args) -> int:
    models = MICRO_MODELS if args.model == "all" else (args.model,)
    rows = []
    status = 0
    for model in models:
        res = run_micro_benchmark(model, args.n, dt=args.dt, n_steps=args.steps,
                                  width=args.width, unroll=args.unroll,
                                  workers=args.workers, repetitions=args.repetitions)
        rows.append((model, args.n, args.width, args.unroll, res.runtime))
        print(f"{model}: {res.runtime:.6f} s at N={args.n}")
        status |= _report_flags(res)
    _write_csv(args.out, "model,N,width,unroll,runtime_seconds", rows)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lanebench",
        description="Lane-packed ensemble ODE benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, width=4, unroll=4):
        p.add_argument("--width", type=int, default=width, choices=(1, 2, 4, 8),
                       help="lane pack width")
        p.add_argument("--unroll", type=int, default=unroll,
                       help="lane packs advanced together (1..16)")
        p.add_argument("--workers", type=int, default=1, help="worker threads")

    p = sub.add_parser("lorenz-perf", help="fixed-step runtime scaling benchmark")
    p.add_argument("--n-list", type=_int_list,
                   default=[2 ** k for k in range(10, 21)],
                   help="comma-separated ensemble sizes")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--repetitions", type=int, default=3)
    common(p, unroll=8)
    p.add_argument("--out", default="lorenz_perf.csv")
    p.set_defaults(func=_cmd_lorenz_perf)

    p = sub.add_parser("km-response", help="bubble frequency response sweep")
    p.add_argument("--n", type=int, default=46080, help="frequency resolution")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--transient", type=int, default=1024)
    p.add_argument("--record", type=int, default=64)
    p.add_argument("--stepper", choices=("ck", "dp"), default="ck")
    common(p)
    p.add_argument("--out", default="km_response.csv")
    p.set_defaults(func=_cmd_km_response)

    p = sub.add_parser("km-work-precision", help="tolerance/error/work study")
    p.add_argument("--freqs", type=_float_list, default=list(WORK_PRECISION_FREQUENCIES))
    p.add_argument("--tols", type=_float_list, default=list(WORK_PRECISION_TOLERANCES))
    p.add_argument("--steppers", type=lambda s: [v for v in s.split(",") if v],
                   default=["ck", "dp"])
    p.add_argument("--out", default="km_work_precision.csv")
    p.set_defaults(func=_cmd_km_work_precision)

    p = sub.add_parser("valve-bifurcation", help="impacting valve bifurcation sweep")
    p.add_argument("--n", type=int, default=30720, help="flow-rate resolution")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--impact-tol", type=float, default=1e-6)
    p.add_argument("--transient", type=int, default=1024)
    p.add_argument("--record", type=int, default=32)
    p.add_argument("--stepper", choices=("ck", "dp"), default="ck")
    common(p)
    p.add_argument("--out", default="valve_bifurcation.csv")
    p.set_defaults(func=_cmd_valve_bifurcation)

    p = sub.add_parser("micro", help="one-dimensional micro-model runtime benchmarks")
    p.add_argument("--model", choices=MICRO_MODELS + ("all",), default="all")
    p.add_argument("--n", type=int, default=1 << 16)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--repetitions", type=int, default=3)
    common(p, unroll=8)
    p.add_argument("--out", default="micro.csv")
    p.set_defaults(func=_cmd_micro)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "unroll") and not 1 <= args.unroll <= 16:
        parser.error("--unroll must be in [1, 16]")
    try:
        return args.func(args)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
