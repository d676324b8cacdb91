"""Command-line entry point: ``gridcheck run|sweep|validate``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings

from .experiments import DEFAULT_SEEDS, SweepError, SweepKind, SweepSpec, emit, run_sweep
from .model import ConfigError, Policy, load_config
from .simulation import InvariantViolation, run_simulation


def _seeds(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridcheck", description="Grid checkpointing policy simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one batch")
    run.add_argument("--config", default="defaults", help="JSON config file, or 'defaults'")
    run.add_argument("--seed", type=int)
    run.add_argument("--policy", choices=[p.value for p in Policy])
    run.add_argument("--fixed-length", type=float, metavar="MI", help="give every gridlet this length")
    run.add_argument("--out", help="output file (default: stdout)")
    run.add_argument("--format", choices=["csv", "json"], default="json")
    run.add_argument("--trace", help="write the tab-separated event trace here")

    sweep = sub.add_parser("sweep", help="paired Baseline/Adaptive sweep")
    sweep.add_argument("--config", default="defaults")
    sweep.add_argument("--kind", choices=[k.value for k in SweepKind], required=True)
    sweep.add_argument("--seeds", type=_seeds, default=DEFAULT_SEEDS, help="comma-separated, default 1..10")
    sweep.add_argument("--end", type=int, help="truncate the sweep grid at this point")
    sweep.add_argument("--fixed-length", type=float, metavar="MI")
    sweep.add_argument("--per-seed", action="store_true", help="one row per (point, seed)")
    sweep.add_argument("--format", choices=["csv", "json"])
    sweep.add_argument("--out", required=True)

    val = sub.add_parser("validate", help="check a config file")
    val.add_argument("--config", required=True)
    return parser


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "fixed_length", None) is not None:
        cfg = cfg.replace(**{"gridlets.fixed_length": args.fixed_length})
    return cfg


def _cmd_run(args) -> int:
    cfg = _load(args)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.policy is not None:
        changes["policy"] = Policy(args.policy)
    if changes:
        cfg = cfg.replace(**changes)
    report = run_simulation(cfg, trace=args.trace is not None)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.writelines(line + "\n" for line in report.trace)
    summary = report.summary()
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        if args.format == "json":
            json.dump(summary, out, indent=2)
            out.write("\n")
        else:
            w = csv.DictWriter(out, fieldnames=list(summary), lineterminator="\n")
            w.writeheader()
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in summary.items()})
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    spec = SweepSpec.canonical(args.kind, cfg, args.seeds, end=args.end)
    report = run_sweep(spec)
    fmt = args.format or ("json" if args.out.endswith(".json") else "csv")
    emit(report, fmt, args.out, per_seed=args.per_seed)
    return 0


def _cmd_validate(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        load_config(args.config)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"{args.config}: ok")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "sweep": _cmd_sweep, "validate": _cmd_validate}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"gridcheck: invalid config: {exc}", file=sys.stderr)
    except (InvariantViolation, SweepError) as exc:
        print(f"gridcheck: invariant violation: {exc}", file=sys.stderr)
    except (OSError, ValueError) as exc:
        print(f"gridcheck: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
