"""Command-line entry point: ``run``, ``compare`` and ``replay`` subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .core import DumpParseError, read_repertoire_csv
from .runner import (
    ComparisonError,
    ConfigError,
    compare_runs,
    env_for_dump,
    load_config,
    replay,
    run_experiment,
)


def _parse_set(items: list[str]) -> dict:
    overrides = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(item, "override must look like key=value")
        try:
            overrides[key] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key] = raw
    return overrides


def cmd_run(args) -> int:
    overrides = _parse_set(args.set)
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    if args.seeds is not None:
        overrides["seeds"] = args.seeds
    if args.trials is not None:
        overrides["agme.trials"] = args.trials
        overrides["babbling.trials"] = args.trials
    cfg = load_config(args.config, overrides)
    for seed_dir in run_experiment(cfg, jobs=args.jobs):
        print(seed_dir / "metrics.csv")
    return 0


def cmd_compare(args) -> int:
    summary = compare_runs(args.dir_a, args.dir_b)
    if args.json:
        print(json.dumps(summary, indent=2))
        return 0
    print("trial,mean_perf_a,mean_perf_b,difference")
    for row in zip(summary["trial"], summary["mean_perf_a"], summary["mean_perf_b"],
                   summary["difference"]):
        print(f"{row[0]},{row[1]!r},{row[2]!r},{row[3]!r}")
    print(f"final_difference,{summary['final_difference']!r}")
    return 0


def cmd_replay(args) -> int:
    outcomes, policies = read_repertoire_csv(args.dump)
    env = env_for_dump(args.dump, args.config)
    if args.index == "all":
        bad = [i for i in range(len(policies)) if not replay(outcomes, policies, env, i)[1]]
        print(f"{len(policies) - len(bad)}/{len(policies)} rows match")
        for i in bad:
            print(f"mismatch at row {i}")
        return 1 if bad else 0
    try:
        index = int(args.index)
    except ValueError:
        raise DumpParseError(f"index must be an integer or 'all', got {args.index!r}") from None
    got, match = replay(outcomes, policies, env, index)
    if args.print_outcome:
        np.savetxt(sys.stdout, got[None, :], fmt="%r", delimiter=",")
    if match:
        print(f"row {index}: match")
        return 0
    diff = int(np.count_nonzero(got != outcomes[index]))
    print(f"row {index}: MISMATCH ({diff} of {got.size} components differ)")
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agme-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every replicate of a JSON config")
    run.add_argument("config", type=Path)
    run.add_argument("--output-dir", help="override output_dir")
    run.add_argument("--seeds", type=int, nargs="+", help="override the replicate seeds")
    run.add_argument("--trials", type=int, help="override the trial budget")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override any field, e.g. --set agme.k=7 (value parsed as JSON)")
    run.add_argument("--jobs", type=int, default=1, help="replicates to run in parallel")
    run.set_defaults(func=cmd_run)

    cmp = sub.add_parser("compare", help="mean perf per trial of two run directories")
    cmp.add_argument("dir_a", type=Path)
    cmp.add_argument("dir_b", type=Path)
    cmp.add_argument("--json", action="store_true", help="emit the summary as JSON")
    cmp.set_defaults(func=cmd_compare)

    rep = sub.add_parser("replay", help="re-execute a dumped policy and check its outcome")
    rep.add_argument("dump", type=Path)
    rep.add_argument("index", help="row index, or 'all'")
    rep.add_argument("--config", type=Path,
                     help="run_config.json (default: two levels above the dump)")
    rep.add_argument("--print-outcome", action="store_true")
    rep.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ComparisonError, DumpParseError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
