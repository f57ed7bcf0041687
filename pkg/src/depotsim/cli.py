"""Command line front end.

Subcommands: run, sweep, metrics, compare, snapshot. Exit codes: 0 success,
1 configuration/validation error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .flow import SolverError
from .io import (compare_reference, load_checkpoint, load_reference_csv,
                 read_timeseries, write_run_outputs, write_snapshot)
from .orchestrator import Simulation
from .params import ConfigurationError
from .sweep import run_sweep


def _cmd_run(args) -> int:
    config = load_config(args.config)
    outdir = Path(args.outdir or config["output.dir"] or "run_output")
    result = Simulation(config).run_pipeline()
    write_run_outputs(result, outdir)
    at = result.series.at_time(result.series.time[-1])
    print(f"run complete: t = {at['t_s']:.0f} s")
    print(f"  free {at['free_pct']:.2f}%  bound {at['bound_pct']:.2f}%  "
          f"absorbed {at['absorbed_pct']:.2f}%")
    print(f"  ledger closure residual {result.ledger.closure_residual():+.2e}")
    print(f"  outputs in {outdir}")
    return 0


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    values: list = []
    for raw in args.values.split(","):
        raw = raw.strip()
        if args.axis == "bmi":
            values.append(raw)
        else:
            values.append(float(raw))
    outdir = Path(args.outdir or "sweep_output")
    entries = run_sweep(config, args.axis, values, outdir)
    for e in entries:
        status = "ok" if e.ok else f"FAILED ({e.error})"
        print(f"  {args.axis}={e.value}: {status}")
    if all(not e.ok for e in entries):
        return 2
    print(f"summary in {outdir / 'sweep_summary.csv'}")
    return 0


def _cmd_metrics(args) -> int:
    series = read_timeseries(Path(args.run_dir) / "timeseries.csv")
    t = np.asarray(series.time)
    print(f"rows: {len(series)}  span: {t[0]:.1f} .. {t[-1]:.1f} s")
    p = series.column("pressure_ball_avg")
    u = series.column("velocity_ball_max")
    pv = series.column("plume_volume_cm3")
    print(f"peak near-source pressure: {p.max():.3f} N/cm^2 at t={t[p.argmax()]:.2f} s")
    print(f"peak speed: {u.max():.4f} cm/s at t={t[u.argmax()]:.2f} s")
    if pv.max() > 0:
        print(f"peak plume volume: {pv.max():.2f} cm^3 at t={t[pv.argmax()]/3600:.2f} h")
    last = series.at_time(t[-1])
    print(f"final split: free {last['free_pct']:.2f}%  bound {last['bound_pct']:.2f}%"
          f"  absorbed {last['absorbed_pct']:.2f}%")
    return 0


def _cmd_compare(args) -> int:
    series = read_timeseries(Path(args.run_dir) / "timeseries.csv")
    reference = load_reference_csv(args.reference)
    t_h = np.asarray(series.time) / 3600.0
    remaining = (series.column("free_pct") + series.column("bound_pct")) / 100.0
    report = compare_reference(t_h, remaining, reference)
    print(f"reference: {report.label} ({report.time_h.size} points)")
    print(f"RMSE of remaining-depot fraction: {report.rmse:.4f}")
    print(f"max deviation: {report.max_deviation:.4f}")
    out = Path(args.run_dir) / "compare_report.csv"
    lines = ["time_h,reference,simulated"]
    lines += [f"{t:.6g},{r:.6g},{s:.6g}" for t, r, s in
              zip(report.time_h, report.reference, report.simulated)]
    out.write_text("\n".join(lines) + "\n")
    print(f"report written to {out}")
    return 0


def _cmd_snapshot(args) -> int:
    path = Path(args.checkpoint)
    if path.is_dir():
        candidates = sorted(path.glob("checkpoint_*.npz"))
        if not candidates:
            raise ConfigurationError(f"no checkpoints in {path}")
        if args.time is None:
            path = candidates[-1]
        else:
            times = []
            for c in candidates:
                state, _, _, _ = load_checkpoint(c)
                times.append(state.t)
            path = candidates[int(np.argmin(np.abs(np.asarray(times) - args.time)))]
    state, _, phase, _ = load_checkpoint(path)
    if args.time is not None and abs(state.t - args.time) > 1e-6:
        print(f"note: nearest checkpoint is t = {state.t:.2f} s ({phase})")
    out = Path(args.out or path.with_suffix(".vtk"))
    write_snapshot(state, out)
    print(f"snapshot written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depotsim",
        description="Axisymmetric electrodiffusion model of subcutaneous "
                    "antibody injection")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full two-phase pipeline")
    p.add_argument("config")
    p.add_argument("--outdir", default="")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run a scenario sweep over one axis")
    p.add_argument("config")
    p.add_argument("--axis", required=True,
                   choices=["buffer_ph", "bmi", "depth", "concentration"])
    p.add_argument("--values", required=True,
                   help="comma-separated axis values")
    p.add_argument("--outdir", default="")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("metrics", help="summarize a finished run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("compare", help="score a run against reference clearance data")
    p.add_argument("run_dir")
    p.add_argument("reference")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("snapshot", help="export a checkpoint as a VTK snapshot")
    p.add_argument("checkpoint", help="checkpoint file or run directory")
    p.add_argument("--time", type=float, default=None,
                   help="pick the checkpoint nearest this time (s)")
    p.add_argument("--out", default="")
    p.set_defaults(func=_cmd_snapshot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
