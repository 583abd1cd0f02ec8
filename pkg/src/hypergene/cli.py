"""Command-line entry points.

Exit codes: 0 on success, 2 for configuration problems (also used by
argparse itself), 3 for missing or malformed data.  HYPERGENE_SEED
overrides the config seed without editing the file.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .datasets import DatasetError, citation_to_hypergraph, save_hypergraph_json
from .harness import (ConfigError, ExperimentConfig, load_config,
                      run_experiment, sweep_adaptation_steps, sweep_clusters,
                      time_pretraining)

CONFIG_EXIT = 2
DATA_EXIT = 3


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.output_dir:
        cfg = replace(cfg, output_dir=args.output_dir)
    if getattr(args, "repeats", None) is not None:
        cfg = replace(cfg, repeats=args.repeats)
    env_seed = os.environ.get("HYPERGENE_SEED")
    if env_seed is not None:
        try:
            cfg = replace(cfg, seed=int(env_seed))
        except ValueError:
            raise ConfigError(f"HYPERGENE_SEED must be an integer, "
                              f"got {env_seed!r}")
    return cfg


def _cmd_run(args) -> int:
    cfg = _load(args)
    result = run_experiment(cfg)
    summary = result.report["metrics"]["accuracy"]
    std = summary.get("std")
    line = f"accuracy {100 * summary['mean']:.2f}"
    if std is not None:
        line += f" +/- {100 * std:.2f}"
    print(f"{line}  ({cfg.repeats} repeat(s), outputs in {result.output_dir})")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    values = [v for chunk in args.values for v in chunk.split(",") if v]
    if not values:
        raise ConfigError("sweep needs at least one value")
    try:
        parsed = [int(v) for v in values]
    except ValueError:
        raise ConfigError(f"sweep values must be integers, got {values}")
    if args.param == "clusters":
        table, _ = sweep_clusters(cfg, parsed)
    else:
        table, _ = sweep_adaptation_steps(cfg, parsed)
    for v, mu in zip(table["values"], table["means"]):
        print(f"{args.param}={v}: accuracy {100 * mu:.2f}")
    print(f"span {100 * table['span']:.2f} points; outputs in {cfg.output_dir}")
    return 0


def _cmd_time(args) -> int:
    cfg = _load(args)
    timing = time_pretraining(cfg, repeats=args.repeats or 1)
    print(f"traditional {timing['traditional_ms']:.0f} ms, "
          f"adaptation {timing['adaptation_ms']:.0f} ms "
          f"({timing['reduction_pct']:.1f}% reduction); "
          f"outputs in {cfg.output_dir}")
    return 0


def _cmd_convert(args) -> int:
    edges_path, nodes_path = args.citation
    hg = citation_to_hypergraph(edges_path, nodes_path, args.mode)
    save_hypergraph_json(args.out, hg)
    sizes = [len(e) for e in hg.hyperedges]
    print(f"wrote {args.out}: {hg.num_nodes} nodes, "
          f"{hg.num_hyperedges} hyperedges, sizes [{min(sizes)}, {max(sizes)}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypergene",
        description="Self-supervised pre-training for hypergraph "
                    "classification: experiments, sweeps, timing, and "
                    "citation-graph conversion.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--output-dir", help="override the config output_dir")
    run.add_argument("--repeats", type=int, help="override config repeats")
    run.set_defaults(fn=_cmd_run)

    sweep = sub.add_parser("sweep", help="sweep one hyperparameter")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--param", required=True,
                       choices=("clusters", "adapt-steps"))
    sweep.add_argument("--values", required=True, nargs="+",
                       help="integers, space or comma separated")
    sweep.add_argument("--output-dir", help="override the config output_dir")
    sweep.add_argument("--repeats", type=int, help="override config repeats")
    sweep.set_defaults(fn=_cmd_sweep)

    timer = sub.add_parser("time",
                           help="compare pre-training procedure wall times")
    timer.add_argument("--config", required=True)
    timer.add_argument("--output-dir", help="override the config output_dir")
    timer.add_argument("--repeats", type=int, default=1)
    timer.set_defaults(fn=_cmd_time)

    conv = sub.add_parser("convert",
                          help="citation graph TSVs to a hypergraph JSON")
    conv.add_argument("--citation", nargs=2, required=True,
                      metavar=("EDGES_TSV", "NODES_TSV"))
    conv.add_argument("--mode", required=True, choices=("noisy", "clean"))
    conv.add_argument("--out", required=True)
    conv.set_defaults(fn=_cmd_convert)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG_EXIT
    except DatasetError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
