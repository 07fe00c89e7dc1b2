"""Command-line entry point: ``l2s-disco run|fig1|oracle|aggregate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import config as config_mod
from .experiment import aggregate_directory, run_experiment, run_fig1_experiment, run_oracle


def _seeds(text: str) -> list[int]:
    """``"0-9"``, ``"0,3,5"`` or a mix of both (non-negative seeds)."""
    seeds = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        lo, _, hi = part.partition("-")
        seeds.extend(range(int(lo), int(hi) + 1) if hi else [int(lo)])
    return seeds


def _load(args):
    cfg = config_mod.load(args.config)
    return cfg.with_overrides(seeds=args.seeds, budget=args.budget, out=args.out, workers=args.workers)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="l2s-disco", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("run", "run a benchmark x method x seed grid"),
        ("fig1", "compare fixed restart strategies on one frozen acquisition function"),
        ("oracle", "brute-force checks: exhaustive optimum and AFO-vs-exhaustive trials"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="TOML experiment configuration")
        p.add_argument("--seeds", type=_seeds, default=None, help="e.g. 0-9 or 0,2,4")
        p.add_argument("--budget", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--workers", type=int, default=None)
    p = sub.add_parser("aggregate", help="recompute aggregate.csv from history files")
    p.add_argument("directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "aggregate":
            report = aggregate_directory(args.directory)
            print(f"aggregated {len(report.table)} method(s) into {args.directory}/aggregate.csv")
            return 0
        cfg = _load(args)
        if args.command == "run":
            report = run_experiment(cfg)
            for method in sorted(report.table):
                _, mean, se, n = report.table[method]
                print(f"{method}: final mean incumbent {mean[-1]:.6g} +/- {se[-1]:.3g} over {n} seed(s)")
            if not report.ok:
                print(f"{len(report.failures)} cell(s) failed; see manifest.json", file=sys.stderr)
                return 1
            return 0
        if args.command == "fig1":
            result = run_fig1_experiment(cfg)
            for row in result["stats"]:
                print(f"{row['a']} vs {row['b']}: U={row['u_statistic']:.1f} p={row['p_value']:.3g}")
            return 0
        summary = run_oracle(cfg)
        print(json.dumps(summary, indent=2, sort_keys=True))
        return 0
    except (config_mod.ConfigError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
