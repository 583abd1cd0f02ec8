"""Seed/context pair construction and negative sampling.

Two negative-sampling strategies feed the node-level pretext task: uniform
sampling restricted to the other hyperedges of the current batch, and
exponential sampling that down-weights structurally close hyperedges by
exp(-gamma * path count).  Paths are counted on the normalized hyperedge
adjacency raised to the path_k-th power, so hyperedges unreachable within
path_k hops share the maximal probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hypergraph import Hypergraph, adjacency_power


@dataclass(frozen=True)
class SamplingConfig:
    gamma: float = 1.0
    path_k: int = 2
    num_negatives: int = 5
    strategy: str = "uniform"

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.path_k < 1:
            raise ValueError(f"path_k must be >= 1, got {self.path_k}")
        if self.num_negatives < 1:
            raise ValueError(
                f"num_negatives must be >= 1, got {self.num_negatives}")
        if self.strategy not in ("uniform", "exponential"):
            raise ValueError(
                f"strategy must be 'uniform' or 'exponential', got {self.strategy!r}")


@dataclass(frozen=True)
class SeedContextPair:
    """One positive example: a seed node against the rest of its hyperedge."""
    hyperedge_index: int
    seed: int
    context: tuple

    def __post_init__(self):
        if len(self.context) == 0:
            raise ValueError("context must be nonempty (|e| >= 2)")


@dataclass(frozen=True)
class NegativeSampleSet:
    """Negative nodes for one pair, with the hyperedges they came from."""
    anchor: int
    nodes: np.ndarray
    sources: np.ndarray


def draw_seed_context(hg: Hypergraph, i: int, rng: np.random.Generator):
    """Uniform seed node from hyperedge i; context is the rest.

    Returns None when |e_i| < 2 (such hyperedges contribute no pairs).
    """
    e = hg.hyperedges[i]
    if len(e) < 2:
        return None
    pos = int(rng.integers(len(e)))
    context = e[:pos] + e[pos + 1:]
    return SeedContextPair(hyperedge_index=i, seed=e[pos], context=context)


def path_count_matrix(a_norm, path_k: int):
    """path_k-th power of the normalized hyperedge adjacency."""
    return adjacency_power(a_norm, path_k)


def exp_sampling_probs(a_k, i: int, gamma: float = 1.0) -> np.ndarray:
    """Distribution over negative-source hyperedges for anchor i.

    Pr_ij = exp(-gamma * a_k[i, j]) / sum_{j != i} exp(-gamma * a_k[i, j]);
    the anchor's own entry is zero.  Rows of a_k absent from the sparsity
    pattern count as zero paths and therefore share the maximal weight.
    """
    m = a_k.shape[0]
    if m < 2:
        raise ValueError("need at least two hyperedges to sample negatives")
    if not 0 <= i < m:
        raise IndexError(f"anchor {i} out of range for m={m}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    row = np.asarray(a_k[[i], :].todense()).ravel() if hasattr(a_k, "todense") \
        else np.asarray(a_k[i], dtype=np.float64).ravel()
    weights = np.exp(-gamma * row)
    weights[i] = 0.0
    total = weights.sum()
    return weights / total


def exp_sampling_matrix(a_k, gamma: float = 1.0) -> np.ndarray:
    """All m anchor distributions stacked into a dense (m, m) matrix.

    Precomputed once per pre-training phase; a_k is fixed, so rows never
    change between epochs.
    """
    m = a_k.shape[0]
    if m < 2:
        raise ValueError("need at least two hyperedges to sample negatives")
    dense = np.asarray(a_k.todense()) if hasattr(a_k, "todense") \
        else np.asarray(a_k, dtype=np.float64)
    weights = np.exp(-gamma * dense)
    np.fill_diagonal(weights, 0.0)
    return weights / weights.sum(axis=1, keepdims=True)


def sample_negatives_exponential(hg: Hypergraph, pair: SeedContextPair,
                                 a_k, config: SamplingConfig,
                                 rng: np.random.Generator,
                                 probs: np.ndarray | None = None) -> NegativeSampleSet:
    """Draw source hyperedges by the exponential distribution, then one
    uniform node from each.  `probs` short-circuits the per-anchor row when
    the caller holds a precomputed exp_sampling_matrix."""
    i = pair.hyperedge_index
    if probs is None:
        probs = exp_sampling_probs(a_k, i, config.gamma)
    sources = rng.choice(len(probs), size=config.num_negatives, p=probs)
    nodes = np.array([hg.hyperedges[j][int(rng.integers(len(hg.hyperedges[j])))]
                      for j in sources], dtype=np.int64)
    return NegativeSampleSet(anchor=i, nodes=nodes,
                             sources=np.asarray(sources, dtype=np.int64))


def sample_negatives_uniform_batch(hg: Hypergraph, batch, pair: SeedContextPair,
                                   config: SamplingConfig,
                                   rng: np.random.Generator) -> NegativeSampleSet:
    """Uniform over the membership slots of the batch's other hyperedges.

    A node belonging to both the anchor and another batch hyperedge can
    still be drawn through the other hyperedge's slot.
    """
    batch = np.asarray(batch, dtype=np.int64)
    slot_nodes, slot_sources = [], []
    for j in batch:
        if j == pair.hyperedge_index:
            continue
        e = hg.hyperedges[j]
        slot_nodes.extend(e)
        slot_sources.extend([j] * len(e))
    if not slot_nodes:
        raise ValueError("batch needs at least one hyperedge besides the anchor")
    picks = rng.integers(len(slot_nodes), size=config.num_negatives)
    return NegativeSampleSet(
        anchor=pair.hyperedge_index,
        nodes=np.array([slot_nodes[p] for p in picks], dtype=np.int64),
        sources=np.array([slot_sources[p] for p in picks], dtype=np.int64),
    )
