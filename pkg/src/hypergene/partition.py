"""Balanced q-way partitioning of the hyperedge overlap graph.

Multilevel scheme in the usual coarsen / initial-partition / refine shape:
heavy-edge matching shrinks the graph until at most 4q vertices remain,
seeded greedy region growing produces the first assignment, and boundary
moves with strictly positive gain refine the cut at every level on the way
back up (so a refinement pass can never increase the cut).  Cluster sizes
count original vertices and respect ceil(1.1 * m / q).

Hypergraphs whose hyperedges share no nodes have an empty overlap graph;
those fall back to capacitated k-means on mean-pooled hyperedge features.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .hypergraph import Hypergraph


@dataclass(frozen=True)
class HyperedgeGraph:
    """One vertex per hyperedge; edge weight = shared-node count."""
    num_vertices: int
    adjacency: sp.csr_array

    def __post_init__(self):
        a = self.adjacency
        if a.shape != (self.num_vertices, self.num_vertices):
            raise ValueError("adjacency shape mismatch")
        if a.diagonal().any():
            raise ValueError("overlap graph must have no self-loops")
        if a.nnz and (a != a.T).nnz:
            raise ValueError("overlap graph must be symmetric")
        if a.nnz and a.data.min() <= 0:
            raise ValueError("overlap weights must be positive")


def build_hyperedge_graph(a) -> HyperedgeGraph:
    """Wrap a hyperedge adjacency (diagonal dropped) as a weighted graph."""
    a = sp.csr_array(a, dtype=np.float64).copy()
    a.setdiag(0.0)
    a.eliminate_zeros()
    return HyperedgeGraph(num_vertices=a.shape[0], adjacency=a)


@dataclass(frozen=True)
class PartitionResult:
    """Cluster id per hyperedge plus the achieved edge cut."""
    labels: np.ndarray
    q: int
    edge_cut: float
    seed: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if len(labels) and (labels.min() < 0 or labels.max() >= self.q):
            raise ValueError("labels must lie in [0, q)")
        cap = balance_cap(len(labels), self.q)
        sizes = np.bincount(labels, minlength=self.q)
        if len(labels) and sizes.max() > cap:
            raise ValueError(
                f"cluster size {sizes.max()} exceeds balance cap {cap}")


def balance_cap(m: int, q: int) -> int:
    """ceil(1.1 * m / q) in exact integer arithmetic."""
    return -((-11 * m) // (10 * q))


def cluster_label_vectors(result: PartitionResult) -> np.ndarray:
    """m x q one-hot matrix of cluster memberships."""
    out = np.zeros((len(result.labels), result.q), dtype=np.float64)
    out[np.arange(len(result.labels)), result.labels] = 1.0
    return out


def edge_cut_value(a: sp.csr_array, labels: np.ndarray) -> float:
    """Total weight of edges whose endpoints live in different clusters."""
    coo = sp.coo_array(a)
    crossing = labels[coo.row] != labels[coo.col]
    return float(coo.data[crossing].sum() / 2.0)


# ---------------------------------------------------------------------------
# multilevel machinery


def _heavy_edge_matching(a: sp.csr_array, rng: np.random.Generator) -> np.ndarray:
    """Match each vertex with its heaviest unmatched neighbor.

    Returns coarse-vertex ids (fine -> coarse).  Unmatched vertices map to
    singleton coarse vertices.
    """
    n = a.shape[0]
    partner = np.full(n, -1, dtype=np.int64)
    indptr, indices, data = a.indptr, a.indices, a.data
    for v in rng.permutation(n):
        if partner[v] != -1:
            continue
        best, best_w = -1, 0.0
        for pos in range(indptr[v], indptr[v + 1]):
            u = indices[pos]
            if u != v and partner[u] == -1 and data[pos] > best_w:
                best, best_w = u, data[pos]
        if best >= 0:
            partner[v] = best
            partner[best] = v
        else:
            partner[v] = v
    coarse = np.full(n, -1, dtype=np.int64)
    nxt = 0
    for v in range(n):
        if coarse[v] == -1:
            coarse[v] = nxt
            coarse[partner[v]] = nxt
            nxt += 1
    return coarse


def _contract(a: sp.csr_array, vw: np.ndarray, coarse: np.ndarray):
    nc = int(coarse.max()) + 1
    n = a.shape[0]
    s = sp.csr_array(
        (np.ones(n), (np.arange(n), coarse)), shape=(n, nc))
    ac = sp.csr_array(s.T @ a @ s)
    ac.setdiag(0.0)
    ac.eliminate_zeros()
    vwc = np.zeros(nc, dtype=np.int64)
    np.add.at(vwc, coarse, vw)
    return ac, vwc


def _region_grow(a: sp.csr_array, vw: np.ndarray, q: int, cap: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Greedy seeded initial assignment at the coarsest level."""
    n = a.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    weights = np.zeros(q, dtype=np.int64)
    total = int(vw.sum())
    target = total / q
    indptr, indices, data = a.indptr, a.indices, a.data
    degrees = np.diff(indptr)

    order = rng.permutation(n)
    for c in range(q):
        seeds = [v for v in order if labels[v] == -1 and degrees[v] > 0]
        if not seeds:
            break
        frontier = {int(seeds[0]): 1.0}
        while frontier and weights[c] < target:
            v = max(frontier, key=lambda u: (frontier[u], -u))
            del frontier[v]
            if labels[v] != -1 or weights[c] + vw[v] > cap:
                continue
            labels[v] = c
            weights[c] += vw[v]
            for pos in range(indptr[v], indptr[v + 1]):
                u = indices[pos]
                if labels[u] == -1:
                    frontier[u] = frontier.get(u, 0.0) + data[pos]

    # leftovers: strongest-connection cluster with room, else lightest.
    # A weighted coarse vertex may fit nowhere, so the lightest cluster can
    # overflow here; _rebalance repairs that once weights are back to one.
    for v in order:
        if labels[v] != -1:
            continue
        conn = np.zeros(q)
        for pos in range(indptr[v], indptr[v + 1]):
            u = indices[pos]
            if labels[u] != -1:
                conn[labels[u]] += data[pos]
        open_c = np.flatnonzero(weights + vw[v] <= cap)
        if len(open_c) == 0:
            open_c = np.array([int(np.argmin(weights))])
        best = max(open_c, key=lambda cc: (conn[cc], -weights[cc]))
        labels[v] = best
        weights[best] += vw[v]
    return labels


def _rebalance(a: sp.csr_array, labels: np.ndarray, q: int,
               cap: int) -> np.ndarray:
    """Evict unit-weight vertices from clusters that exceed the cap.

    Only the coarse levels can overfill a cluster (their vertices carry
    aggregated weight), and refinement never moves into a full cluster, so
    an overflow survives uncoarsening.  At the finest level every vertex
    weighs one and the total weight is below q * cap, which makes this
    repair always feasible: each move shrinks the overflow by exactly one.
    Among the evictable vertices the cheapest move by cut damage wins.
    """
    weights = np.bincount(labels, minlength=q)
    if weights.max() <= cap:
        return labels
    labels = labels.copy()
    indptr, indices, data = a.indptr, a.indices, a.data
    while True:
        over = np.flatnonzero(weights > cap)
        if len(over) == 0:
            return labels
        src = int(over[np.argmax(weights[over])])
        room = np.flatnonzero(weights < cap)
        best_v, best_dst, best_gain = -1, -1, -np.inf
        for v in np.flatnonzero(labels == src):
            conn = np.zeros(q)
            for pos in range(indptr[v], indptr[v + 1]):
                conn[labels[indices[pos]]] += data[pos]
            dst = int(room[np.argmax(conn[room])])
            gain = conn[dst] - conn[src]
            if gain > best_gain:
                best_v, best_dst, best_gain = int(v), dst, gain
        labels[best_v] = best_dst
        weights[src] -= 1
        weights[best_dst] += 1


def _refine(a: sp.csr_array, vw: np.ndarray, labels: np.ndarray, q: int,
            cap: int, rng: np.random.Generator, passes: int = 2) -> np.ndarray:
    """Boundary moves with strictly positive gain; cut is non-increasing."""
    labels = labels.copy()
    weights = np.zeros(q, dtype=np.int64)
    np.add.at(weights, labels, vw)
    indptr, indices, data = a.indptr, a.indices, a.data
    for _ in range(passes):
        moved = False
        for v in rng.permutation(a.shape[0]):
            start, end = indptr[v], indptr[v + 1]
            if start == end:
                continue
            conn = np.zeros(q)
            for pos in range(start, end):
                conn[labels[indices[pos]]] += data[pos]
            src = labels[v]
            gains = conn - conn[src]
            gains[src] = 0.0
            room = weights + vw[v] <= cap
            room[src] = False
            gains[~room] = 0.0
            dst = int(np.argmax(gains))
            if gains[dst] > 0 and weights[src] - vw[v] >= 0:
                labels[v] = dst
                weights[src] -= vw[v]
                weights[dst] += vw[v]
                moved = True
        if not moved:
            break
    return labels


def _fm_refine(a: sp.csr_array, vw: np.ndarray, labels: np.ndarray, q: int,
               cap: int, passes: int = 2) -> np.ndarray:
    """Full move-and-rollback refinement for small graphs.

    Each pass moves every vertex at most once, always taking the best
    feasible move even when its gain is negative, then rolls back to the
    best prefix seen.  The cut therefore never increases across a pass,
    but the search can tunnel out of positive-gain dead ends.
    """
    labels = labels.copy()
    n = a.shape[0]
    indptr, indices, data = a.indptr, a.indices, a.data
    for _ in range(passes):
        weights = np.zeros(q, dtype=np.int64)
        np.add.at(weights, labels, vw)
        locked = np.zeros(n, dtype=bool)
        cur = edge_cut_value(a, labels)
        best_cut, best_len = cur, 0
        trail = []
        while True:
            best_gain, best_move = -np.inf, None
            for v in range(n):
                if locked[v]:
                    continue
                src = labels[v]
                conn = np.zeros(q)
                for pos in range(indptr[v], indptr[v + 1]):
                    conn[labels[indices[pos]]] += data[pos]
                for dst in range(q):
                    if dst == src or weights[dst] + vw[v] > cap:
                        continue
                    gain = conn[dst] - conn[src]
                    if gain > best_gain + 1e-12:
                        best_gain, best_move = gain, (v, src, dst)
            if best_move is None:
                break
            v, src, dst = best_move
            labels[v] = dst
            locked[v] = True
            weights[src] -= vw[v]
            weights[dst] += vw[v]
            cur -= best_gain
            trail.append(best_move)
            if cur < best_cut - 1e-12:
                best_cut, best_len = cur, len(trail)
        for v, src, _dst in reversed(trail[best_len:]):
            labels[v] = src
        if best_len == 0:
            break
    return labels


def partition_multilevel(g: HyperedgeGraph, q: int, seed: int = 0,
                         restarts: int = 8) -> PartitionResult:
    """Balanced q-way partition of a weighted overlap graph."""
    m = g.num_vertices
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if q > m:
        raise ValueError(f"q={q} exceeds the number of hyperedges {m}")
    if q == 1:
        return PartitionResult(np.zeros(m, dtype=np.int64), 1, 0.0, seed)

    rng = np.random.default_rng(seed)
    cap = balance_cap(m, q)

    # coarsen
    levels = []
    a, vw = g.adjacency, np.ones(m, dtype=np.int64)
    while a.shape[0] > 4 * q:
        coarse = _heavy_edge_matching(a, rng)
        nc = int(coarse.max()) + 1
        if nc >= a.shape[0]:
            break
        levels.append((a, vw, coarse))
        a, vw = _contract(a, vw, coarse)

    # initial partition at the coarsest level, best of several seedings
    small = max(4 * q, 64)
    best_labels, best_cut = None, np.inf
    for _ in range(restarts):
        cand = _region_grow(a, vw, q, cap, rng)
        cand = _fm_refine(a, vw, cand, q, cap)
        cut = edge_cut_value(a, cand)
        if cut < best_cut:
            best_labels, best_cut = cand, cut
    labels = best_labels

    # uncoarsen with refinement at every level; the exhaustive-move pass is
    # quadratic, so large levels get the positive-gain sweep instead
    for a_fine, vw_fine, coarse in reversed(levels):
        labels = labels[coarse]
        if a_fine.shape[0] <= small:
            labels = _fm_refine(a_fine, vw_fine, labels, q, cap)
        else:
            labels = _refine(a_fine, vw_fine, labels, q, cap, rng)

    labels = _rebalance(g.adjacency, labels, q, cap)

    # isolated vertices go round-robin to the smallest clusters
    degrees = np.diff(g.adjacency.indptr)
    isolated = np.flatnonzero(degrees == 0)
    if len(isolated):
        weights = np.bincount(labels, minlength=q)
        weights[labels[isolated]] -= 1
        for v in isolated:
            c = int(np.argmin(weights))
            labels[v] = c
            weights[c] += 1

    return PartitionResult(labels, q, edge_cut_value(g.adjacency, labels), seed)


# ---------------------------------------------------------------------------
# feature-space fallback for overlap-free hypergraphs


def _kmeans_capacitated(points: np.ndarray, q: int, cap: int,
                        rng: np.random.Generator, iters: int = 50) -> np.ndarray:
    """Seeded farthest-point k-means, then overflow spills to the nearest
    center with room so the balance cap still holds."""
    n = len(points)
    centers = [points[int(rng.integers(n))]]
    dists = np.linalg.norm(points - centers[0], axis=1)
    for _ in range(q - 1):
        centers.append(points[int(np.argmax(dists))])
        dists = np.minimum(dists, np.linalg.norm(points - centers[-1], axis=1))
    centers = np.stack(centers)

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(iters):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        for c in range(q):
            mask = new_labels == c
            if mask.any():
                centers[c] = points[mask].mean(axis=0)
            else:
                far = int(np.argmax(d2.min(axis=1)))
                centers[c] = points[far]
                new_labels[far] = c
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels

    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    sizes = np.bincount(labels, minlength=q)
    while sizes.max() > cap:
        c = int(np.argmax(sizes))
        members = np.flatnonzero(labels == c)
        worst = members[np.argmax(d2[members, c])]
        alt_order = np.argsort(d2[worst])
        for alt in alt_order:
            if alt != c and sizes[alt] < cap:
                labels[worst] = alt
                sizes[c] -= 1
                sizes[alt] += 1
                break
    return labels


def partition_hyperedges(hg: Hypergraph, q: int, seed: int = 0) -> PartitionResult:
    """Cluster pseudo-labels for a hypergraph's hyperedges.

    Uses the multilevel graph partitioner when hyperedges overlap; an
    overlap-free hypergraph (empty A) falls back to capacitated k-means on
    mean-pooled member features.
    """
    a = hg.hyperedge_adjacency(zero_diagonal=True)
    if a.nnz > 0:
        return partition_multilevel(build_hyperedge_graph(a), q, seed)
    m = hg.num_hyperedges
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if q > m:
        raise ValueError(f"q={q} exceeds the number of hyperedges {m}")
    if q == 1:
        return PartitionResult(np.zeros(m, dtype=np.int64), 1, 0.0, seed)
    pooled = np.stack([hg.features[list(e)].mean(axis=0) for e in hg.hyperedges])
    labels = _kmeans_capacitated(pooled, q, balance_cap(m, q),
                                 np.random.default_rng(seed))
    return PartitionResult(labels, q, 0.0, seed)


# ---------------------------------------------------------------------------
# cache


def save_partition(path, result: PartitionResult):
    blob = {"q": result.q, "labels": result.labels.tolist(),
            "edge_cut": result.edge_cut, "seed": result.seed}
    with open(path, "w") as fh:
        json.dump(blob, fh, sort_keys=True)


def load_partition(path) -> PartitionResult:
    with open(path) as fh:
        blob = json.load(fh)
    return PartitionResult(np.asarray(blob["labels"], dtype=np.int64),
                           int(blob["q"]), float(blob["edge_cut"]),
                           int(blob["seed"]))
