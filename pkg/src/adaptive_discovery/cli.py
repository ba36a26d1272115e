"""Command-line front end.

    asd simulate --config linear20.cfg --set runs=10 --set seed=7
    asd replay --config replay.cfg
    asd graph-stats --edges g.txt
    asd demo-lower-bound --t 20,40,80 --runs 10

Outputs go to ``--out-dir`` (fallback: ``$ASD_OUT_DIR``, then the current
directory) together with ``resolved.cfg``, which reproduces the run when
passed back as ``--config``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as cfgio
from .bench import ExperimentConfig, hard_instance_demo, linear_fit, run_experiment, write_raw_csv, \
    write_summary_csv
from .errors import ConfigError, DatasetError, DiscoveryError, InvalidCombination
from .graphtools import estimate_smallest_mis, greedy_clique_cover, read_edge_list
from .replay import ReplayConfig, format_table_text, run_replay_study, summarize_table, write_table_csv

logger = logging.getLogger("adaptive_discovery")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_SCHEMA = 4
EXIT_INVALID = 5
EXIT_DATASET = 6


@dataclass
class LowerBoundConfig:
    t: tuple = ("20", "40", "80")
    runs: int = 10
    seed: int = 0
    gap: float = 0.5


def _out_dir(args) -> Path:
    out = Path(args.out_dir or os.environ.get("ASD_OUT_DIR") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(cls, args):
    raw = cfgio.read_file(args.config) if args.config else {}
    raw.update(cfgio.parse_overrides(args.set or []))
    return cfgio.build(cls, raw)


def cmd_simulate(args) -> int:
    cfg = _load(ExperimentConfig, args).resolved()
    out = _out_dir(args)
    result = run_experiment(cfg)
    write_raw_csv(result.records, out / "raw.csv")
    write_summary_csv(result.summary, out / "summary.csv")
    (out / "resolved.cfg").write_text(cfgio.dump(result.config), encoding="utf-8")
    for p in result.summary.policies:
        mean, sd = result.summary.final(p)
        print(f"{p}: cumulative regret at T={cfg.T}: {mean:.4f} (sd {sd:.4f})")
    return EXIT_OK


def cmd_replay(args) -> int:
    cfg = _load(ReplayConfig, args)
    _ = cfg.policy_config
    out = _out_dir(args)
    rows = summarize_table(run_replay_study(cfg))
    write_table_csv(rows, out / "replay_summary.csv")
    text = format_table_text(rows)
    (out / "replay_table.txt").write_text(text + "\n", encoding="utf-8")
    (out / "resolved.cfg").write_text(cfgio.dump(cfg), encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_graph_stats(args) -> int:
    graph = read_edge_list(args.edges)
    cover = greedy_clique_cover(graph)
    mis = estimate_smallest_mis(graph, args.trials, np.random.default_rng(args.seed))
    print(f"n {graph.n}")
    print(f"edges {graph.n_edges}")
    print(f"clique_cover_size {len(cover)}")
    print(f"smallest_mis_estimate {mis}")
    return EXIT_OK


def cmd_demo_lower_bound(args) -> int:
    raw = {"t": args.t, "runs": str(args.runs), "seed": str(args.seed), "gap": str(args.gap)}
    cfg = cfgio.build(LowerBoundConfig, raw)
    try:
        Ts = [int(v) for v in cfg.t]
    except ValueError:
        raise ConfigError(f"--t must be a comma-separated list of integers, got {args.t!r}") from None
    if not Ts or min(Ts) < 1:
        raise InvalidCombination("every horizon in --t must be at least 1")
    if cfg.runs < 1:
        raise InvalidCombination("--runs must be at least 1")
    out = _out_dir(args)
    table = hard_instance_demo(Ts, cfg.runs, cfg.seed, cfg.gap)
    with open(out / "lower_bound.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["T", "mean_final_regret"])
        for T, mean in table:
            w.writerow([T, repr(mean)])
    (out / "resolved.cfg").write_text(cfgio.dump(cfg), encoding="utf-8")
    for T, mean in table:
        print(f"T={T}: mean final regret {mean:.4f}")
    if len(table) >= 2:
        slope, _, r2 = linear_fit(*zip(*table))
        print(f"slope {slope:.4f}  R^2 {r2:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asd", description="Adaptive sampling for discovery.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log one line per run")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--out-dir", help="output directory (default $ASD_OUT_DIR or .)")
        return p

    with_config(sub.add_parser("simulate", help="run a simulation grid")).set_defaults(func=cmd_simulate)
    with_config(sub.add_parser("replay", help="evaluate policies on a recorded dataset")) \
        .set_defaults(func=cmd_replay)

    g = sub.add_parser("graph-stats", help="structural statistics of an edge-list graph")
    g.add_argument("--edges", required=True)
    g.add_argument("--trials", type=int, default=64)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_graph_stats)

    d = sub.add_parser("demo-lower-bound", help="random policy on the unstructured hard instance")
    d.add_argument("--t", default="20,40,80", help="comma-separated horizons")
    d.add_argument("--runs", type=int, default=10)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--gap", type=float, default=0.5)
    d.add_argument("--out-dir")
    d.set_defaults(func=cmd_demo_lower_bound)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        code, msg = EXIT_MISSING_FILE, f"file not found: {exc.filename}"
    except InvalidCombination as exc:
        code, msg = EXIT_INVALID, str(exc)
    except ConfigError as exc:
        code, msg = EXIT_SCHEMA, str(exc)
    except DatasetError as exc:
        code, msg = (EXIT_MISSING_FILE if "file not found" in str(exc) else EXIT_DATASET), str(exc)
    except (DiscoveryError, ValueError) as exc:
        code, msg = EXIT_RUNTIME, str(exc)
    print(f"asd: error: {' '.join(msg.split())}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
