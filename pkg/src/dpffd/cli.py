"""Command line interface: ``dpffd run | compare | validate | init-scenario``."""
import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import kernels
from .errors import ConfigError, DPFFDError, NumericDivergenceError
from .experiment import CENTRALIZED, DISTRIBUTED, compare_traces, detection_summary, run_experiment
from .export import export, load_trace
from .scenario import Scenario

OUT_ENV = "DPFFD_OUT_DIR"


def _load_scenario(path):
    return Scenario() if path is None else Scenario.load(path)


def cmd_run(args):
    scenario = _load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    if args.steps is not None:
        scenario.duration_steps = args.steps
    if args.particles is not None:
        scenario.filter.n_particles = args.particles
    if args.threads is not None:
        scenario.filter.threads = args.threads
    out = Path(args.out or os.environ.get(OUT_ENV) or "dpffd-out")
    formats = ("csv", "json") if args.format == "both" else (args.format,)
    start = time.perf_counter()
    try:
        trace = run_experiment(scenario, args.mode)
    except NumericDivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        trace = getattr(exc, "trace", None)
        if trace is not None and trace.n_steps:
            export(trace, out, formats, plots=False, stem="trace-partial")
        return 3
    elapsed = time.perf_counter() - start
    files = export(trace, out, formats, plots=args.plots)
    scenario.save(out / "scenario.yaml")
    summary = {"mode": args.mode, "seed": scenario.seed, "steps": trace.n_steps, "seconds": round(elapsed, 2),
               "backend": kernels.BACKEND, "detection": detection_summary(trace),
               "files": [str(f) for f in files]}
    print(json.dumps(summary, indent=2))
    return 0


def cmd_compare(args):
    report = compare_traces(load_trace(args.a), load_trace(args.b))
    print(json.dumps(report, indent=2))
    return 0


def cmd_validate(args):
    Scenario.load(args.scenario).validate()
    print(f"{args.scenario}: ok")
    return 0


def cmd_init(args):
    Scenario().save(args.path)
    print(f"wrote {args.path}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="dpffd", description="Distributed particle filtering fault diagnosis")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write its trace")
    r.add_argument("--scenario", type=Path, help="scenario YAML (default: built-in nine-tank scenario)")
    r.add_argument("--mode", choices=(CENTRALIZED, DISTRIBUTED), default=DISTRIBUTED)
    r.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    r.add_argument("--out", type=Path, help=f"output directory (default: ${OUT_ENV} or ./dpffd-out)")
    r.add_argument("--format", choices=("csv", "json", "both"), default="both")
    r.add_argument("--plots", action=argparse.BooleanOptionalAction, default=True)
    r.add_argument("--threads", type=int, help="worker threads for per-node work")
    r.add_argument("--steps", type=int, help="override the run duration in steps")
    r.add_argument("--particles", type=int, help="override the particle count")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="compare two trace files (.json or .csv)")
    c.add_argument("a", type=Path)
    c.add_argument("b", type=Path)
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("validate", help="validate a scenario file")
    v.add_argument("scenario", type=Path)
    v.set_defaults(func=cmd_validate)

    i = sub.add_parser("init-scenario", help="write the default scenario to a file")
    i.add_argument("path", type=Path)
    i.set_defaults(func=cmd_init)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        for field, msg in exc.errors:
            print(f"invalid scenario: {field}: {msg}", file=sys.stderr)
        return 2
    except (DPFFDError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
