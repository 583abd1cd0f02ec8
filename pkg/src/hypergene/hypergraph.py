"""Hypergraph data model and structural algebra.

Incidence M is an n x m binary sparse matrix (node i in hyperedge j).
The hyperedge adjacency A = M^T M counts shared nodes between hyperedges;
its symmetric degree normalization (with zeroed diagonal) feeds the
path-based negative sampler.  Clique and tree expansions turn a single
hyperedge into an ordinary graph for the message-passing encoders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class Hypergraph:
    """Immutable hypergraph: node features plus hyperedge membership lists.

    Parameters
    ----------
    num_nodes : int
        Node count n; node ids are 0..n-1.
    hyperedges : sequence of node-index sequences
        Each hyperedge is non-empty with distinct in-range node ids.
    features : array (n, d)
        Dense float64 node feature matrix.
    labels : sequence of int, optional
        Per-hyperedge category ids in [0, t); length m when present.
    node_names, hyperedge_names : sequences of str, optional
    """

    def __init__(self, num_nodes, hyperedges, features, labels=None,
                 node_names=None, hyperedge_names=None):
        n = int(num_nodes)
        if n < 0:
            raise ValueError("num_nodes must be non-negative")
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != n:
            raise ValueError(
                f"features must be (num_nodes, d), got {features.shape} for n={n}")

        edges = []
        for j, e in enumerate(hyperedges):
            members = tuple(int(v) for v in e)
            if len(members) == 0:
                raise ValueError(f"hyperedge {j} is empty")
            if len(set(members)) != len(members):
                raise ValueError(f"hyperedge {j} repeats a node")
            for v in members:
                if not 0 <= v < n:
                    raise ValueError(f"hyperedge {j} references node {v} >= {n}")
            edges.append(members)

        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)
            if labels.shape != (len(edges),):
                raise ValueError(
                    f"labels must have one entry per hyperedge, got {labels.shape}")
            if len(labels) and labels.min() < 0:
                raise ValueError("labels must be non-negative category ids")

        self.num_nodes = n
        self.hyperedges = tuple(edges)
        self.features = features
        self.labels = labels
        self.node_names = tuple(node_names) if node_names is not None else None
        self.hyperedge_names = (tuple(hyperedge_names)
                                if hyperedge_names is not None else None)
        self._incidence = None

    @property
    def num_hyperedges(self) -> int:
        return len(self.hyperedges)

    @property
    def num_classes(self) -> int:
        if self.labels is None or len(self.labels) == 0:
            return 0
        return int(self.labels.max()) + 1

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def sizes(self) -> np.ndarray:
        return np.array([len(e) for e in self.hyperedges], dtype=np.int64)

    def incidence(self) -> sp.csr_array:
        """n x m binary incidence matrix; cached."""
        if self._incidence is None:
            rows, cols = [], []
            for j, e in enumerate(self.hyperedges):
                rows.extend(e)
                cols.extend([j] * len(e))
            data = np.ones(len(rows), dtype=np.float64)
            self._incidence = sp.csr_array(
                (data, (rows, cols)),
                shape=(self.num_nodes, self.num_hyperedges))
        return self._incidence

    def hyperedge_adjacency(self, zero_diagonal: bool = False) -> sp.csr_array:
        """A = M^T M: off-diagonal counts shared nodes, diagonal |e_i|."""
        m = self.incidence()
        a = (m.T @ m).tocsr()
        if zero_diagonal:
            a.setdiag(0.0)
            a.eliminate_zeros()
        return a

    def select(self, indices) -> "Hypergraph":
        """Sub-hypergraph over a subset of hyperedges (nodes unchanged)."""
        indices = np.asarray(indices, dtype=np.int64)
        edges = [self.hyperedges[i] for i in indices]
        labels = self.labels[indices] if self.labels is not None else None
        names = ([self.hyperedge_names[i] for i in indices]
                 if self.hyperedge_names is not None else None)
        return Hypergraph(self.num_nodes, edges, self.features, labels,
                          node_names=self.node_names, hyperedge_names=names)

    def __repr__(self):
        return (f"Hypergraph(n={self.num_nodes}, m={self.num_hyperedges}, "
                f"d={self.feature_dim}, labeled={self.labels is not None})")


def normalize_adjacency(a: sp.csr_array) -> sp.csr_array:
    """Symmetric degree normalization D^(-1/2) A D^(-1/2).

    Expects a symmetric matrix with zero diagonal; rows with zero degree
    stay zero (isolated hyperedges).
    """
    a = sp.csr_array(a)
    deg = np.asarray(a.sum(axis=1)).reshape(-1)
    with np.errstate(divide="ignore"):
        inv_root = 1.0 / np.sqrt(deg)
    inv_root[~np.isfinite(inv_root)] = 0.0
    d = sp.diags_array(inv_root, format="csr")
    return sp.csr_array(d @ a @ d)


def adjacency_power(a_norm: sp.csr_array, k: int) -> sp.csr_array:
    """k-th matrix power of the normalized adjacency (k >= 1)."""
    if k < 1:
        raise ValueError(f"path length must be >= 1, got {k}")
    out = sp.csr_array(a_norm)
    for _ in range(k - 1):
        out = sp.csr_array(out @ a_norm)
    return out


@dataclass(frozen=True)
class ExpandedHyperedge:
    """A hyperedge rewritten as an ordinary graph over its members."""
    node_ids: tuple
    pair_edges: tuple
    virtual_root: int | None = None
    root_feature: np.ndarray | None = field(default=None, compare=False)


def clique_expand(hg: Hypergraph, i: int) -> ExpandedHyperedge:
    """Complete graph over the members of hyperedge i."""
    e = hg.hyperedges[i]
    pairs = tuple((e[a], e[b])
                  for a in range(len(e)) for b in range(a + 1, len(e)))
    return ExpandedHyperedge(node_ids=e, pair_edges=pairs)


def tree_expand(hg: Hypergraph, i: int) -> ExpandedHyperedge:
    """Star graph: a virtual root joined to every member of hyperedge i.

    The root id is num_nodes (outside the real node range) and its feature
    is the mean of the member features.
    """
    e = hg.hyperedges[i]
    root = hg.num_nodes
    pairs = tuple((root, v) for v in e)
    feat = hg.features[list(e)].mean(axis=0)
    return ExpandedHyperedge(node_ids=e, pair_edges=pairs,
                             virtual_root=root, root_feature=feat)


def ego_network_hypergraphs(edges, node_labels, features, mode: str,
                            node_names=None) -> Hypergraph:
    """Build a hypergraph of ego networks from an undirected simple graph.

    One candidate hyperedge per node: the node plus its 1-hop neighbors
    (edges read in both directions, self-loops ignored).  Candidates of
    size 1 are dropped.  The hyperedge label is the majority node label in
    "noisy" mode (ties resolved to the center's label when it participates
    in the tie, else the smallest tied label); "clean" mode instead keeps
    only hyperedges whose members all share one label.

    edges: (E, 2) int array of node-id pairs.
    node_labels: (n,) int array, one label per node (required).
    features: (n, d) float array.
    """
    if mode not in ("noisy", "clean"):
        raise ValueError(f"mode must be 'noisy' or 'clean', got {mode!r}")
    labels = np.asarray(node_labels, dtype=np.int64)
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if labels.shape != (n,):
        raise ValueError("every node needs a label")
    if labels.min(initial=0) < 0:
        raise ValueError("node labels must be non-negative")

    neighbors = [set() for _ in range(n)]
    for u, v in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u}, {v}) references a missing node")
        if u == v:
            continue
        neighbors[u].add(int(v))
        neighbors[v].add(int(u))

    kept, kept_labels, kept_names = [], [], []
    for center in range(n):
        members = sorted(neighbors[center] | {center})
        if len(members) < 2:
            continue
        member_labels = labels[members]
        if mode == "clean":
            if not np.all(member_labels == member_labels[0]):
                continue
            label = int(member_labels[0])
        else:
            counts = np.bincount(member_labels)
            top = np.flatnonzero(counts == counts.max())
            center_label = int(labels[center])
            label = center_label if center_label in top else int(top[0])
        kept.append(members)
        kept_labels.append(label)
        if node_names is not None:
            kept_names.append(f"ego:{node_names[center]}")

    return Hypergraph(n, kept, features, kept_labels,
                      node_names=node_names,
                      hyperedge_names=kept_names if node_names else None)


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint hyperedge-index sets covering every labeled hyperedge."""
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int

    def __post_init__(self):
        parts = np.concatenate([self.train, self.val, self.test])
        if len(np.unique(parts)) != len(parts):
            raise ValueError("split parts overlap")


def split_hyperedges(hg: Hypergraph, ratios=(0.6, 0.2, 0.2),
                     seed: int = 0) -> DatasetSplit:
    """Seeded shuffle of labeled hyperedges, cut to the given ratios.

    Val and test sizes use round-half-up on their quotas; the remainder
    lands in train (10 -> 6/2/2, 11 -> 7/2/2).  Deterministic per seed.
    """
    if hg.labels is None:
        raise ValueError("splitting requires hyperedge labels")
    m = hg.num_hyperedges
    if m < 3:
        raise ValueError(f"need at least 3 labeled hyperedges, got {m}")
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three values summing to 1, got {ratios}")

    order = np.random.default_rng(seed).permutation(m)
    n_val = int(np.floor(ratios[1] * m + 0.5))
    n_test = int(np.floor(ratios[2] * m + 0.5))
    n_train = m - n_val - n_test
    if n_train <= 0:
        raise ValueError("ratios leave no training hyperedges")
    return DatasetSplit(
        train=np.sort(order[:n_train]),
        val=np.sort(order[n_train:n_train + n_val]),
        test=np.sort(order[n_train + n_val:]),
        seed=seed,
    )
