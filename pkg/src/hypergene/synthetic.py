"""Synthetic citation graphs with planted class structure.

Useful for demos and for exercising the full pipeline where no real
citation dataset is available: features are noisy class indicators and
edges prefer same-class endpoints, so both the feature and the structure
signal carry label information (structure more strongly, which is what
pre-training exploits).
"""

from __future__ import annotations

import numpy as np


def synthetic_citation_graph(num_nodes: int = 200, num_classes: int = 4,
                             feature_dim: int = 32, mean_degree: float = 3.0,
                             intra_fraction: float = 0.9,
                             flip_prob: float = 0.2, seed: int = 0):
    """Returns (edges, labels, features) for a planted-partition graph.

    Classes are balanced.  Each class owns a block of feature columns;
    a node starts from its class prototype and every bit flips with
    flip_prob.  Each node draws ~mean_degree partners, same-class with
    probability intra_fraction.
    """
    if num_classes < 2 or num_nodes < 2 * num_classes:
        raise ValueError("need >= 2 classes and a few nodes per class")
    if not 0.0 <= intra_fraction <= 1.0:
        raise ValueError("intra_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)

    labels = np.arange(num_nodes) % num_classes
    rng.shuffle(labels)

    block = max(1, feature_dim // num_classes)
    prototypes = np.zeros((num_classes, feature_dim))
    for c in range(num_classes):
        prototypes[c, c * block:(c + 1) * block] = 1.0
    flips = rng.random((num_nodes, feature_dim)) < flip_prob
    features = np.abs(prototypes[labels] - flips.astype(np.float64))

    by_class = [np.flatnonzero(labels == c) for c in range(num_classes)]
    edges = set()
    for u in range(num_nodes):
        for _ in range(max(1, rng.poisson(mean_degree))):
            if rng.random() < intra_fraction:
                pool = by_class[labels[u]]
            else:
                pool = np.flatnonzero(labels != labels[u])
            v = int(pool[rng.integers(len(pool))])
            if v != u:
                edges.add((min(u, v), max(u, v)))

    return (np.array(sorted(edges), dtype=np.int64), labels.astype(np.int64),
            features)


def write_citation_tsv(edges_path, nodes_path, edges, labels, features,
                       class_names=None):
    """Write the two-file TSV layout consumed by the citation loaders."""
    labels = np.asarray(labels)
    if class_names is None:
        class_names = [f"class_{c}" for c in range(int(labels.max()) + 1)]
    with open(nodes_path, "w") as fh:
        for i in range(len(labels)):
            values = "\t".join(f"{v:g}" for v in features[i])
            fh.write(f"n{i}\t{class_names[labels[i]]}\t{values}\n")
    with open(edges_path, "w") as fh:
        for u, v in edges:
            fh.write(f"n{u}\tn{v}\n")
