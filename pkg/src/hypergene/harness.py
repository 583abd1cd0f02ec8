"""Experiment harness: config files, repeated runs, sweeps, and timing.

A run directory is self-contained: config.json (the fully resolved
configuration), report.json (metrics; byte-identical across reruns of the
same config and seed), log.csv (per-epoch training log), timing.json
(wall times, kept out of the report so the report stays deterministic),
checkpoints/, and rendered figures.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .datasets import (DatasetError, citation_to_hypergraph,
                       load_hypergraph_json)
from .gnn import GnnConfig
from .hypergraph import Hypergraph, split_hyperedges
from .metrics import accuracy, per_class_pr_auc
from .plots import save_sweep_errorbar, save_timing_bars, save_training_curves
from .sampling import SamplingConfig
from .tensor import save_params
from .training import TrainConfig, predict_logits, run_strategy

KNOWN_METRICS = ("accuracy", "pr-auc")
PRETEXT_PHASES = ("node-pretext", "hyperedge-pretext", "adaptation")


class ConfigError(Exception):
    """Invalid experiment configuration."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: dict
    output_dir: str
    train: TrainConfig = TrainConfig()
    gnn: GnnConfig = GnnConfig()
    sampling: SamplingConfig = SamplingConfig()
    repeats: int = 10
    metrics: tuple = ("accuracy",)
    split_mode: str = "per-seed"
    split_seed: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.split_mode not in ("per-seed", "fixed"):
            raise ConfigError("split.mode must be 'per-seed' or 'fixed'")
        for m in self.metrics:
            if m not in KNOWN_METRICS:
                raise ConfigError(
                    f"unknown metric {m!r}, choose from {KNOWN_METRICS}")

    def to_dict(self) -> dict:
        """Full resolved echo, defaults included."""
        return {
            "dataset": dict(self.dataset),
            "output_dir": self.output_dir,
            "train": dataclasses.asdict(self.train),
            "resolved": {
                "setting": self.train.resolved_setting,
                "module_mode": self.train.resolved_module_mode,
            },
            "gnn": dataclasses.asdict(self.gnn),
            "sampling": dataclasses.asdict(self.sampling),
            "repeats": self.repeats,
            "metrics": list(self.metrics),
            "split": {"mode": self.split_mode, "seed": self.split_seed},
            "seed": self.seed,
        }


def _check_keys(blob: dict, allowed, where: str):
    unknown = set(blob) - set(allowed)
    if unknown:
        raise ConfigError(
            f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _build_section(cls, blob: dict, where: str):
    names = [f.name for f in dataclasses.fields(cls)]
    _check_keys(blob, names, where)
    try:
        return cls(**blob)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(blob: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a parsed config; unknown keys are rejected everywhere.

    Relative dataset paths resolve against base_dir (the config file's
    directory) so configs stay portable.
    """
    if not isinstance(blob, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(blob, ("dataset", "output_dir", "train", "gnn", "sampling",
                       "repeats", "metrics", "split", "seed"), "config")
    for key in ("dataset", "output_dir"):
        if key not in blob:
            raise ConfigError(f"config misses required key {key!r}")

    dataset = dict(blob["dataset"])
    kind = dataset.get("kind")
    if kind == "hypergraph-json":
        _check_keys(dataset, ("kind", "path"), "dataset")
        if "path" not in dataset:
            raise ConfigError("dataset of kind 'hypergraph-json' needs 'path'")
    elif kind == "citation-ego":
        _check_keys(dataset, ("kind", "edges", "nodes", "mode"), "dataset")
        for key in ("edges", "nodes", "mode"):
            if key not in dataset:
                raise ConfigError(f"dataset of kind 'citation-ego' needs {key!r}")
        if dataset["mode"] not in ("noisy", "clean"):
            raise ConfigError("dataset.mode must be 'noisy' or 'clean'")
    else:
        raise ConfigError(
            "dataset.kind must be 'hypergraph-json' or 'citation-ego'")
    if base_dir is not None:
        for key in ("path", "edges", "nodes"):
            if key in dataset and not Path(dataset[key]).is_absolute():
                dataset[key] = str(base_dir / dataset[key])

    train_blob = dict(blob.get("train", {}))
    if "seed" in train_blob:
        raise ConfigError("set the top-level 'seed', not train.seed; "
                          "repeats derive their seeds from it")
    split = dict(blob.get("split", {}))
    _check_keys(split, ("mode", "seed"), "split")

    return ExperimentConfig(
        dataset=dataset,
        output_dir=str(blob["output_dir"]),
        train=_build_section(TrainConfig, train_blob, "train"),
        gnn=_build_section(GnnConfig, dict(blob.get("gnn", {})), "gnn"),
        sampling=_build_section(SamplingConfig, dict(blob.get("sampling", {})),
                                "sampling"),
        repeats=blob.get("repeats", 10),
        metrics=tuple(blob.get("metrics", ["accuracy"])),
        split_mode=split.get("mode", "per-seed"),
        split_seed=split.get("seed", 0),
        seed=blob.get("seed", 0),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        blob = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(blob, base_dir=path.parent)


def load_dataset(cfg: ExperimentConfig) -> Hypergraph:
    ds = cfg.dataset
    if ds["kind"] == "hypergraph-json":
        hg = load_hypergraph_json(ds["path"])
    else:
        hg = citation_to_hypergraph(ds["edges"], ds["nodes"], ds["mode"])
    if hg.labels is None:
        raise DatasetError("experiments need hyperedge labels")
    return hg


# ---------------------------------------------------------------------------
# label bookkeeping


class LabelStore:
    """Gatekeeper for label reads during a run.

    Test labels stay locked until evaluation; every read is counted so
    the report can show that test labels fed nothing but the final
    metrics.  The class count is dataset metadata, not a label read.
    """

    def __init__(self, labels: np.ndarray):
        self._labels = np.asarray(labels, dtype=np.int64)
        self.reads: dict[str, int] = {}
        self._test_open = False

    @property
    def num_classes(self) -> int:
        return int(self._labels.max()) + 1

    def unlock_test(self):
        self._test_open = True

    def take(self, ids, purpose: str) -> np.ndarray:
        if purpose == "test" and not self._test_open:
            raise RuntimeError("test labels are locked until evaluation")
        ids = np.asarray(ids, dtype=np.int64)
        self.reads[purpose] = self.reads.get(purpose, 0) + int(ids.size)
        return self._labels[ids]


# ---------------------------------------------------------------------------
# serialization helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path, obj):
    Path(path).write_text(
        json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")


def write_log_csv(path, rows_by_repeat):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["repeat", "epoch", "phase", "loss", "val_accuracy",
                         "lr", "wall_ms"])
        for repeat, rows in enumerate(rows_by_repeat):
            for r in rows:
                writer.writerow([
                    repeat, r.epoch, r.phase, repr(float(r.loss)),
                    "" if r.val_accuracy is None else repr(float(r.val_accuracy)),
                    repr(float(r.lr)), f"{r.wall_ms:.3f}"])


def _summary(values: list[float]) -> dict:
    """Mean and population std; std is omitted for a single value."""
    out = {"values": [float(v) for v in values],
           "mean": float(np.mean(values))}
    if len(values) >= 2:
        out["std"] = float(np.std(values))
    return out


# ---------------------------------------------------------------------------
# single experiment


@dataclass
class RunResult:
    report: dict
    output_dir: Path
    logs: list = field(default_factory=list)

    @property
    def mean_accuracy(self) -> float:
        return self.report["metrics"]["accuracy"]["mean"]


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> RunResult:
    """Run cfg.repeats seeded repetitions and aggregate their metrics.

    Repeat r uses seed cfg.seed + r for training and, in per-seed split
    mode, for the split shuffle as well.  report.json carries no wall
    times; those go to timing.json and log.csv.
    """
    hg = load_dataset(cfg)
    out_dir = Path(cfg.output_dir)
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "checkpoints").mkdir(exist_ok=True)

    per_repeat = []
    acc_values: list[float] = []
    pr_auc_values: list[float] = []
    logs_by_repeat = []
    repeat_ms = []
    label_reads: dict[str, int] = {}

    for r in range(cfg.repeats):
        seed_r = cfg.seed + r
        split_seed = seed_r if cfg.split_mode == "per-seed" else cfg.split_seed
        split = split_hyperedges(hg, seed=split_seed)
        store = LabelStore(hg.labels)
        y_train = store.take(split.train, "train")
        y_val = store.take(split.val, "val")

        t0 = time.perf_counter()
        outcome = run_strategy(hg, split, y_train, y_val,
                               replace(cfg.train, seed=seed_r), cfg.gnn,
                               cfg.sampling, num_classes=store.num_classes)
        repeat_ms.append((time.perf_counter() - t0) * 1e3)

        store.unlock_test()
        y_test = store.take(split.test, "test")
        logits = predict_logits(hg, split.test, outcome.state.params,
                                outcome.head_task, outcome.state.gnn)
        acc = accuracy(np.argmax(logits, axis=1), y_test)
        acc_values.append(acc)

        row = {"seed": seed_r, "split_seed": split_seed, "accuracy": acc,
               "best_val_accuracy": float(outcome.best_val),
               "best_epoch": int(outcome.best_epoch)}
        if "pr-auc" in cfg.metrics:
            shifted = logits - logits.max(axis=1, keepdims=True)
            probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
            by_class = per_class_pr_auc(probs, y_test)
            row["pr_auc_per_class"] = {str(c): v for c, v in by_class.items()}
            row["pr_auc_macro"] = float(np.mean(list(by_class.values())))
            pr_auc_values.append(row["pr_auc_macro"])
        per_repeat.append(row)
        logs_by_repeat.append(outcome.logs)
        for k, v in store.reads.items():
            label_reads[k] = label_reads.get(k, 0) + v

        if write:
            save_params(out_dir / "checkpoints" / f"final-r{r}.npz",
                        {**outcome.state.params, **outcome.head_task})

    metrics = {"accuracy": _summary(acc_values)}
    if pr_auc_values:
        metrics["pr_auc_macro"] = _summary(pr_auc_values)

    # the echo omits output_dir so reports from identical configs compare
    # byte for byte regardless of where they were written
    echo = {k: v for k, v in cfg.to_dict().items() if k != "output_dir"}
    report = {
        "config": echo,
        "dataset": {"num_nodes": hg.num_nodes,
                    "num_hyperedges": hg.num_hyperedges,
                    "num_classes": int(hg.labels.max()) + 1},
        "repeats": cfg.repeats,
        "seeds": [cfg.seed + r for r in range(cfg.repeats)],
        "per_repeat": per_repeat,
        "metrics": metrics,
        "label_reads": label_reads,
    }

    if write:
        write_json(out_dir / "config.json", cfg.to_dict())
        write_json(out_dir / "report.json", report)
        write_log_csv(out_dir / "log.csv", logs_by_repeat)
        phases_ms: dict[str, float] = {}
        for rows in logs_by_repeat:
            for row in rows:
                phases_ms[row.phase] = phases_ms.get(row.phase, 0.0) + row.wall_ms
        write_json(out_dir / "timing.json",
                   {"per_repeat_ms": repeat_ms, "total_ms": sum(repeat_ms),
                    "phases_ms": phases_ms})
        save_training_curves(logs_by_repeat[0], out_dir / "training-curves.png")

    return RunResult(report=report, output_dir=out_dir, logs=logs_by_repeat)


# ---------------------------------------------------------------------------
# sweeps


def _sweep(cfg: ExperimentConfig, param: str, values, train_field: str):
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    means, stds, runs = [], [], []
    for v in values:
        sub = replace(cfg,
                      train=replace(cfg.train, **{train_field: v}),
                      output_dir=str(out_dir / f"{param}-{v}"))
        result = run_experiment(sub)
        summary = result.report["metrics"]["accuracy"]
        means.append(summary["mean"])
        stds.append(summary.get("std"))
        runs.append(result)

    span = float(max(means) - min(means))
    table = {"param": param, "values": list(values), "means": means,
             "stds": stds, "span": span, "seeds": runs[0].report["seeds"]}
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([param, "mean_accuracy", "std_accuracy"])
        for v, mu, sd in zip(values, means, stds):
            writer.writerow([v, repr(mu), "" if sd is None else repr(sd)])
    write_json(out_dir / "sweep.json", table)
    save_sweep_errorbar(param, list(values), means,
                        [0.0 if s is None else s for s in stds],
                        out_dir / "sweep.png")
    return table, runs


def sweep_clusters(cfg: ExperimentConfig, values):
    """Accuracy as a function of the cluster count q; shared seeds."""
    if cfg.train.strategy not in ("traditional", "adaptation",
                                  "hyperedge-only", "joint"):
        raise ConfigError(
            f"strategy {cfg.train.strategy!r} has no cluster phase to sweep")
    values = [int(v) for v in values]
    if any(v < 1 for v in values):
        raise ConfigError("cluster counts must be >= 1")
    return _sweep(cfg, "clusters", values, "clusters")


def sweep_adaptation_steps(cfg: ExperimentConfig, values):
    """Accuracy as a function of the adaptation step count s; shared seeds."""
    if not (cfg.train.strategy in ("adaptation", "hyperedge-only")
            and cfg.train.resolved_setting == "transductive"):
        raise ConfigError("sweeping adaptation steps needs a transductive "
                          "'adaptation' or 'hyperedge-only' strategy")
    values = [int(v) for v in values]
    if any(v < 0 for v in values):
        raise ConfigError("adaptation step counts must be >= 0")
    return _sweep(cfg, "adaptation_steps", values, "adaptation_steps")


# ---------------------------------------------------------------------------
# pre-training cost comparison


def time_pretraining(cfg: ExperimentConfig, repeats: int = 1) -> dict:
    """Wall-time of both pre-training procedures on the same data and seeds.

    Fine-tuning is excluded (epochs_finetune=0); both procedures share
    the node-context phase budget, so the difference is the second
    phase: full cluster pre-training versus a few adaptation steps.
    """
    hg = load_dataset(cfg)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    totals: dict[str, float] = {}
    phase_ms: dict[str, dict[str, float]] = {}
    for strategy in ("traditional", "adaptation"):
        totals[strategy] = 0.0
        phase_ms[strategy] = {}
        for r in range(repeats):
            seed_r = cfg.seed + r
            split_seed = (seed_r if cfg.split_mode == "per-seed"
                          else cfg.split_seed)
            split = split_hyperedges(hg, seed=split_seed)
            store = LabelStore(hg.labels)
            y_train = store.take(split.train, "train")
            y_val = store.take(split.val, "val")
            tc = replace(cfg.train, strategy=strategy, epochs_finetune=0,
                         seed=seed_r)
            outcome = run_strategy(hg, split, y_train, y_val, tc, cfg.gnn,
                                   cfg.sampling,
                                   num_classes=store.num_classes)
            for row in outcome.logs:
                if row.phase in PRETEXT_PHASES:
                    totals[strategy] += row.wall_ms
                    bucket = phase_ms[strategy]
                    bucket[row.phase] = bucket.get(row.phase, 0.0) + row.wall_ms
        totals[strategy] /= repeats
        phase_ms[strategy] = {k: v / repeats
                              for k, v in phase_ms[strategy].items()}

    reduction = 100.0 * (1.0 - totals["adaptation"] / totals["traditional"])
    timing = {"traditional_ms": totals["traditional"],
              "adaptation_ms": totals["adaptation"],
              "reduction_pct": reduction,
              "phases_ms": phase_ms,
              "repeats": repeats}

    write_json(out_dir / "timing.json", timing)
    with open(out_dir / "timing.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "phase", "mean_ms"])
        for strategy, phases in phase_ms.items():
            for phase, ms in sorted(phases.items()):
                writer.writerow([strategy, phase, f"{ms:.3f}"])
    save_timing_bars(phase_ms, out_dir / "timing.png")
    return timing
