"""Command line entry point: ``python -m reda <command> ...``.

Errors are reported as a single JSON line on stderr,
``{"error": "<ExceptionType>", "message": "..."}``, with exit status 1
(2 for bad arguments). ``SEDA_LOG_LEVEL`` sets the log level (default
WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from .assignment import AuctionConfig, objective_value, solve_auction, solve_brute_force, solve_exact
from .experiment import (
    aggregate,
    evaluate_checkpoint,
    export_plot_data,
    load_config,
    load_run,
    run_experiment,
    write_summary_csv,
)


def _train(args) -> None:
    cfg = load_config(args.config)
    seeds = cfg.seeds if args.seed is None else (args.seed,)
    out = Path(args.out)
    for seed in seeds:
        run_dir = out if args.seed is not None else out / f"seed_{seed}"
        rec = run_experiment(cfg, seed, run_dir)
        print(json.dumps({"seed": seed, "out": str(run_dir), "mean_return": rec.final["mean_return"],
                          "wall_clock": round(rec.wall_clock, 3)}))


def _eval(args) -> None:
    m = evaluate_checkpoint(args.checkpoint, args.episodes)
    m.pop("returns")
    print(json.dumps(m))


def _solve(args) -> None:
    beta = np.loadtxt(args.matrix, delimiter=",", ndmin=2)
    if args.method == "exact":
        x = solve_exact(beta)
    elif args.method == "auction":
        x = solve_auction(beta, AuctionConfig(epsilon_bid=args.epsilon))
    else:
        x = solve_brute_force(beta)
    for i, j in enumerate(x):
        print(f"{i},{j}")
    print(f"objective,{objective_value(beta, x)!r}")


def _aggregate(args) -> None:
    groups = defaultdict(list)
    algo = {}
    for d in args.runs:
        rec = load_run(d)
        groups[rec.config_hash].append(rec)
        algo[rec.config_hash] = next(
            line.split("=", 1)[1].strip() for line in rec.config_text.splitlines() if line.startswith("algorithm")
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summaries = {}
    for h, recs in groups.items():
        label = algo[h] if list(algo.values()).count(algo[h]) == 1 else f"{algo[h]}-{h[:8]}"
        s = aggregate(recs)
        summaries[label] = s
        write_summary_csv(s, out / f"summary_{label}.csv")
    export_plot_data(summaries, out)
    print(json.dumps({label: {"n_runs": s["n_runs"], "final_mean_return": s["final"]["mean_return"]["mean"]}
                      for label, s in summaries.items()}))


def _fail(kind: str, message: str, status: int) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    sys.exit(status)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("UsageError", f"{self.prog}: {message}", 2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="reda", description="Train, evaluate and aggregate sequential assignment experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train and evaluate from a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int, default=None, help="single seed; default runs every seed in the config")
    t.add_argument("--out", required=True)
    t.set_defaults(func=_train)

    e = sub.add_parser("eval", help="evaluate a saved checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int, default=100)
    e.set_defaults(func=_eval)

    s = sub.add_parser("solve", help="solve a benefit matrix given as CSV (rows = agents)")
    s.add_argument("matrix")
    s.add_argument("--method", choices=("exact", "auction", "brute"), default="exact")
    s.add_argument("--epsilon", type=float, default=0.01, help="auction bid increment")
    s.set_defaults(func=_solve)

    a = sub.add_parser("aggregate", help="mean/std across run directories, plus figure CSVs")
    a.add_argument("--runs", nargs="+", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=_aggregate)
    return p


def main(argv=None) -> int:
    level = os.environ.get("SEDA_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 -- report every failure as one line
        print(json.dumps({"error": type(exc).__name__, "message": " ".join(str(exc).split())}), file=sys.stderr)
        return 1
    return 0
