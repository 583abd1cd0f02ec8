"""Figure rendering for experiment outputs.

Every figure lands next to the delimited files it illustrates, so a run
directory is self-contained: log.csv with training-curves.png, sweep.csv
with sweep.png, timing.csv with timing.png.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

PHASE_ORDER = ("node-pretext", "hyperedge-pretext", "adaptation",
               "finetune", "joint")


def save_training_curves(log_rows, path):
    """Loss per epoch, one panel per phase, plus validation accuracy."""
    phases = [p for p in PHASE_ORDER if any(r.phase == p for r in log_rows)]
    if not phases:
        return
    fig, axes = plt.subplots(1, len(phases), figsize=(4 * len(phases), 3.2),
                             squeeze=False)
    for ax, phase in zip(axes[0], phases):
        rows = [r for r in log_rows if r.phase == phase]
        ax.plot([r.epoch for r in rows], [r.loss for r in rows],
                color="tab:blue", label="loss")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.set_title(phase)
        vals = [(r.epoch, r.val_accuracy) for r in rows
                if r.val_accuracy is not None]
        if vals:
            twin = ax.twinx()
            twin.plot(*zip(*vals), color="tab:orange", label="val accuracy")
            twin.set_ylabel("val accuracy")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_sweep_errorbar(param_name, values, means, stds, path):
    """Mean metric with std whiskers across one swept parameter."""
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.errorbar(values, means, yerr=stds if any(s is not None for s in stds)
                else None, marker="o", capsize=3, color="tab:blue")
    ax.set_xlabel(param_name)
    ax.set_ylabel("test accuracy")
    ax.set_title(f"sensitivity to {param_name}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_timing_bars(phase_ms, path):
    """Stacked per-phase wall time for each pre-training procedure."""
    strategies = list(phase_ms)
    phases = sorted({p for d in phase_ms.values() for p in d})
    fig, ax = plt.subplots(figsize=(5, 3.4))
    bottoms = [0.0] * len(strategies)
    for phase in phases:
        heights = [phase_ms[s].get(phase, 0.0) for s in strategies]
        ax.bar(strategies, heights, bottom=bottoms, label=phase)
        bottoms = [b + h for b, h in zip(bottoms, heights)]
    ax.set_ylabel("wall time (ms)")
    ax.set_title("pre-training cost")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
