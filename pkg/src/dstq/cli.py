"""Batch command line: ``dstq <mode> <file> [options]``.

Exit codes: 0 success, 2 infeasible, 3 cap exceeded, 4 retry cap exhausted,
1 any other error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import DstqError
from .graph import format_rational, parse_dst
from .pipeline import (
    BACKENDS,
    PipelineConfig,
    bench,
    run_approx,
    run_lcst_direct,
    run_lp_bound,
    run_stats,
)
from .oracle import exact_opt

COMMANDS = ("exact", "approx", "lp-bound", "lcst", "stats", "bench")
CAP_KEYS = {"nodes": "max_nodes", "twigs": "max_twigs", "lp": "max_lp_vars"}


def parse_caps(text: str) -> dict:
    """``nodes=N,twigs=N,lp=N`` into config field overrides."""
    out = {}
    for part in filter(None, text.split(",")):
        key, sep, val = part.partition("=")
        if not sep or key not in CAP_KEYS:
            raise argparse.ArgumentTypeError(f"bad cap {part!r}; use {','.join(CAP_KEYS)}")
        try:
            out[CAP_KEYS[key]] = int(val)
        except ValueError:
            raise argparse.ArgumentTypeError(f"cap {key} needs an integer") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dstq", description="Directed Steiner tree toolkit.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("file", help="instance file (corpus directory for bench)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--g", type=int, default=None)
    ap.add_argument("--depth", type=int, default=None)
    ap.add_argument("--caps", type=parse_caps, default={})
    ap.add_argument("--rounds", type=int, default=None)
    ap.add_argument("--reps", type=int, default=None)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--backend", choices=BACKENDS, default="dist")
    ap.add_argument("--csv", dest="csv_path", default=None)
    return ap


def resolve_seed(arg) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("DSTQ_SEED")
    return int(env) if env else 0


def _emit(text: str, path):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def run(args) -> int:
    mode = "approx" if args.command == "approx" else args.command
    config = PipelineConfig(
        mode=mode, seed=resolve_seed(args.seed), g=args.g, depth=args.depth,
        rounds=args.rounds, reps=args.reps, backend=args.backend, trials=args.trials,
        csv_path=args.csv_path, **args.caps,
    )
    if args.command == "bench":
        _emit(bench(args.file, config), config.csv_path)
        return 0
    text = Path(args.file).read_text()
    if args.command == "exact":
        res = exact_opt(parse_dst(text))
        print(f"opt: {format_rational(res.opt)}")
        for h, t in sorted(res.tree.edges):
            print(f"edge {h} {t}")
    elif args.command == "approx":
        sol, report = run_approx(parse_dst(text), config)
        sys.stdout.write(report.as_text())
        for h, t in sorted(sol.edges):
            print(f"edge {h} {t}")
    elif args.command == "lp-bound":
        print(f"lp_bound: {format_rational(run_lp_bound(parse_dst(text), config))}")
    elif args.command == "lcst":
        sol, report = run_lcst_direct(text, config)
        sys.stdout.write(report.as_text())
        print("nodes: " + " ".join(str(v) for v in sorted(sol.nodes)))
    else:
        _emit(run_stats(text, config).to_csv(), config.csv_path)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except DstqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
