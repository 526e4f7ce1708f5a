"""Command-line entry point: ``python -m cloudlb {simulate,compare,avail}``.

Exit status: 0 on success, 2 for configuration problems, 3 when a run
breaks one of its invariants.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from cloudlb.availability import AvailabilityParams, expected_availability, is_available
from cloudlb.compare import compare_policies, overload_scenario, write_comparison
from cloudlb.config import (
    ConfigError,
    PolicyKind,
    SchedulingMode,
    default_paper_config,
    load_config,
    validate_config,
)
from cloudlb.engine import SimulationAborted
from cloudlb.metrics import summarize
from cloudlb.report import write_run
from cloudlb.simulation import InvariantViolation, Simulation

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3


class _ConfigProblem(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cloudlb", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario and write its reports")
    sim.add_argument("--config", type=Path, help="scenario file (default: built-in scenario)")
    sim.add_argument("--policy", choices=[k.value for k in PolicyKind])
    sim.add_argument("--mode", choices=[m.value for m in SchedulingMode])
    sim.add_argument("--seed", type=int)
    sim.add_argument("--hours", type=float)
    sim.add_argument("--threshold", type=int, help="throttled concurrency cap per VM")
    sim.add_argument("--out", type=Path, required=True)
    sim.add_argument("--trace", action="store_true", help="also write trace.tsv")
    sim.add_argument("--assignments", action="store_true", help="also write assignments.csv")
    sim.add_argument("--arrivals", action="store_true", help="also write arrivals.csv")

    cmp = sub.add_parser("compare", help="seed-averaged comparison of all policies")
    cmp.add_argument("--config", type=Path)
    cmp.add_argument("--seeds", type=int, default=20)
    cmp.add_argument("--hours", type=float)
    cmp.add_argument("--overload", type=float, metavar="FACTOR",
                     help="replace the traffic by one overload hour at FACTOR x capacity")
    cmp.add_argument("--out", type=Path, required=True)

    av = sub.add_parser("avail", help="expected availability of a resource")
    av.add_argument("--mp", type=float, required=True, help="measurement period (min)")
    av.add_argument("--rl", type=float, required=True, help="loss events per period")
    av.add_argument("--de", type=float, required=True, help="downtime per event (min)")
    av.add_argument("--threshold", type=float)
    return p


def _scenario(args):
    try:
        cfg = load_config(args.config) if args.config else default_paper_config()
    except (ConfigError, OSError) as exc:
        raise _ConfigProblem(str(exc)) from exc
    changes = {}
    if getattr(args, "policy", None):
        changes["policy"] = PolicyKind(args.policy)
    if getattr(args, "mode", None):
        changes["scheduling_mode"] = SchedulingMode(args.mode)
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "hours", None) is not None:
        changes["duration"] = args.hours
    if getattr(args, "threshold", None) is not None:
        changes["throttle_threshold"] = args.threshold
    cfg = replace(cfg, **changes)
    problems = validate_config(cfg)
    if problems:
        raise _ConfigProblem("invalid configuration:\n  " + "\n  ".join(problems))
    return cfg


def _simulate(args) -> int:
    cfg = _scenario(args)
    args.out.mkdir(parents=True, exist_ok=True)
    if args.trace:
        with open(args.out / "trace.tsv", "w", newline="") as trace:
            result = Simulation(cfg, trace=trace).run()
    else:
        result = Simulation(cfg).run()
    write_run(result, args.out, assignments=args.assignments, arrivals=args.arrivals)
    tables = summarize(result.store)
    print(tables["response"].format("Userbase"))
    print()
    print(tables["processing"].format("Data Center"))
    print(f"\n{result.generated} requests, {result.migrated} migrated; reports in {args.out}")
    return EXIT_OK


def _compare(args) -> int:
    cfg = _scenario(args)
    if args.seeds < 1:
        raise _ConfigProblem("--seeds must be at least 1")
    if args.overload is not None:
        cfg = overload_scenario(cfg, load_factor=args.overload)
    result = compare_policies(cfg, range(args.seeds))
    args.out.mkdir(parents=True, exist_ok=True)
    write_comparison(result, args.out / "compare.json")
    print(result.format())
    for name, value in result.verdicts.items():
        print(f"{name}: {value}")
    return EXIT_OK


def _avail(args) -> int:
    try:
        p = AvailabilityParams(args.mp, args.rl, args.de)
        rating = expected_availability(p)
        ok = None if args.threshold is None else is_available(p, args.threshold)
    except ValueError as exc:
        raise _ConfigProblem(str(exc)) from exc
    note = " (clamped)" if rating.clamped else ""
    print(f"availability rating: {rating.a_e:.6f} ({rating.percent:.2f}%){note}")
    if ok is not None:
        print(f"available at threshold {args.threshold}: {'yes' if ok else 'no'}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"simulate": _simulate, "compare": _compare, "avail": _avail}[args.command]
    try:
        return handler(args)
    except _ConfigProblem as exc:
        print(f"cloudlb: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantViolation, SimulationAborted) as exc:
        print(f"cloudlb: run aborted: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
