"""Evaluation metrics: accuracy and precision-recall AUC."""

from __future__ import annotations

import numpy as np


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError(
            f"shape mismatch: {predictions.shape} vs {labels.shape}")
    if predictions.size == 0:
        raise ValueError("accuracy of an empty prediction set is undefined")
    return float(np.mean(predictions == labels))


def pr_auc(scores, positives) -> float:
    """Area under the precision-recall curve, step interpolation.

    Thresholds sweep the unique score values from high to low; tied
    scores enter together.  The area is sum((R_t - R_{t-1}) * P_t), the
    average-precision form.  Both classes must be present.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    if scores.shape != positives.shape or scores.ndim != 1:
        raise ValueError("scores and positives must be equal-length vectors")
    if scores.size == 0:
        raise ValueError("pr_auc of an empty set is undefined")
    total_pos = int(positives.sum())
    if total_pos == 0 or total_pos == scores.size:
        raise ValueError("pr_auc needs at least one positive and one negative")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    tp = np.cumsum(positives[order]).astype(np.float64)
    taken = np.arange(1, scores.size + 1, dtype=np.float64)

    # keep only the last index of each tie group
    boundary = np.ones(scores.size, dtype=bool)
    boundary[:-1] = sorted_scores[:-1] != sorted_scores[1:]
    precision = tp[boundary] / taken[boundary]
    recall = tp[boundary] / total_pos

    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(np.sum((recall - prev_recall) * precision))


def per_class_pr_auc(score_matrix, labels) -> dict[int, float]:
    """One-vs-rest PR-AUC per class from a (N, C) score matrix.

    Classes absent from labels (or covering all of them) are skipped.
    """
    score_matrix = np.asarray(score_matrix, dtype=np.float64)
    labels = np.asarray(labels)
    out: dict[int, float] = {}
    for c in range(score_matrix.shape[1]):
        mask = labels == c
        if 0 < int(mask.sum()) < labels.size:
            out[c] = pr_auc(score_matrix[:, c], mask)
    return out
