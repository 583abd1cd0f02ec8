"""Message-passing encoders specialized to hyperedge expansions.

A batch of hyperedges is encoded as one block-diagonal graph: each
hyperedge contributes a contiguous block of rows (its member nodes, plus a
virtual root in tree mode) and a local aggregation block determined by the
layer kind.  Aggregation matrices are constants, so they participate in
backprop only through const_matmul, and the per-hyperedge blocks are cached
and reassembled per batch.

Layer semantics on the expansion graph:
  gin:  h' = MLP((1 + eps) * h_v + sum of neighbor h_w), MLP = 2-layer ReLU
  gcn:  h' = relu(W @ sum over N(v) + {v} of h_w / sqrt(d_v * d_w))
  sage: h' = relu(W @ [h_v || mean of neighbor h_w])
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import tensor as T
from .tensor import Tensor

LAYER_KINDS = ("gin", "gcn", "sage")
EXPANSIONS = ("clique", "tree")


@dataclass(frozen=True)
class GnnConfig:
    layer_kind: str = "gin"
    num_layers: int = 1
    hidden_dim: int = 64
    gin_eps: float = 0.0
    module_mode: str = "one"
    expansion: str = "clique"

    def __post_init__(self):
        if self.layer_kind not in LAYER_KINDS:
            raise ValueError(f"layer_kind must be one of {LAYER_KINDS}")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.module_mode not in ("one", "two"):
            raise ValueError("module_mode must be 'one' or 'two'")
        if self.expansion not in EXPANSIONS:
            raise ValueError(f"expansion must be one of {EXPANSIONS}")

    @property
    def edge_repr_dim(self) -> int:
        """Width of a hyperedge representation fed to the cluster/task heads."""
        return self.hidden_dim * (2 if self.module_mode == "two" else 1)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_encoder(config: GnnConfig, in_dim: int, rng: np.random.Generator,
                 prefix: str = "enc") -> dict[str, Tensor]:
    """Fresh encoder parameters for one branch."""
    params = {}
    d = in_dim
    h = config.hidden_dim
    for layer in range(config.num_layers):
        key = f"{prefix}.l{layer}"
        if config.layer_kind == "gin":
            params[f"{key}.W1"] = Tensor(glorot(rng, d, h), requires_grad=True)
            params[f"{key}.b1"] = Tensor(np.zeros(h), requires_grad=True)
            params[f"{key}.W2"] = Tensor(glorot(rng, h, h), requires_grad=True)
            params[f"{key}.b2"] = Tensor(np.zeros(h), requires_grad=True)
        elif config.layer_kind == "gcn":
            params[f"{key}.W"] = Tensor(glorot(rng, d, h), requires_grad=True)
            params[f"{key}.b"] = Tensor(np.zeros(h), requires_grad=True)
        else:
            params[f"{key}.Ws"] = Tensor(glorot(rng, d, h), requires_grad=True)
            params[f"{key}.Wn"] = Tensor(glorot(rng, d, h), requires_grad=True)
            params[f"{key}.b"] = Tensor(np.zeros(h), requires_grad=True)
        d = h
    return params


def init_head(in_dim: int, hidden_dim: int, out_dim: int,
              rng: np.random.Generator, prefix: str) -> dict[str, Tensor]:
    """2-layer MLP head: Linear -> ReLU -> Dropout(0.5) -> Linear."""
    return {
        f"{prefix}.W1": Tensor(glorot(rng, in_dim, hidden_dim), requires_grad=True),
        f"{prefix}.b1": Tensor(np.zeros(hidden_dim), requires_grad=True),
        f"{prefix}.W2": Tensor(glorot(rng, hidden_dim, out_dim), requires_grad=True),
        f"{prefix}.b2": Tensor(np.zeros(out_dim), requires_grad=True),
    }


def apply_head(params: dict, prefix: str, h: Tensor,
               rng: np.random.Generator, training: bool,
               dropout_p: float = 0.5) -> Tensor:
    z = T.relu(T.add(T.matmul(h, params[f"{prefix}.W1"]), params[f"{prefix}.b1"]))
    z = T.dropout(z, dropout_p, rng, training)
    return T.add(T.matmul(z, params[f"{prefix}.W2"]), params[f"{prefix}.b2"])


def mean_pool(h: Tensor, rows) -> Tensor:
    """Arithmetic mean of the selected embedding rows."""
    rows = np.asarray(rows, dtype=np.intp)
    if rows.size == 0:
        raise ValueError("mean_pool over an empty subset")
    return T.row_mean(T.gather_rows(h, rows))


# ---------------------------------------------------------------------------
# expansion blocks


def _local_block(size: int, layer_kind: str, gin_eps: float,
                 expansion: str) -> np.ndarray:
    """Aggregation block for one hyperedge of `size` members.

    Tree mode appends the virtual root as the last row.  Rows are small
    (|e| or |e|+1 square), dense is fine.
    """
    s = size
    if expansion == "clique":
        if layer_kind == "gin":
            # (1+eps) I + (J - I) = J + eps I
            return np.full((s, s), 1.0) + gin_eps * np.eye(s)
        if layer_kind == "gcn":
            # with self-loops every member has degree s
            return np.full((s, s), 1.0 / s)
        neigh = np.full((s, s), 1.0) - np.eye(s)
        if s > 1:
            neigh /= s - 1
        return neigh
    # tree: star over members plus root (root index s)
    adj = np.zeros((s + 1, s + 1))
    adj[s, :s] = 1.0
    adj[:s, s] = 1.0
    if layer_kind == "gin":
        return adj + (1.0 + gin_eps) * np.eye(s + 1)
    if layer_kind == "gcn":
        deg = adj.sum(axis=1) + 1.0
        scale = 1.0 / np.sqrt(deg)
        return (adj + np.eye(s + 1)) * scale[:, None] * scale[None, :]
    row_sum = adj.sum(axis=1, keepdims=True)
    return adj / np.maximum(row_sum, 1.0)


@dataclass
class BatchStructure:
    """Constant per-batch matrices for the block-diagonal forward pass."""
    edge_ids: np.ndarray
    sizes: np.ndarray           # member count per batch item
    member_starts: np.ndarray   # first member row of each batch item
    num_rows: int
    agg: sp.csr_array           # (R, R) aggregation
    pool: sp.csr_array          # (B, R) mean over member rows
    inputs: np.ndarray          # (R, d) constant feature rows

    def member_row(self, batch_pos: int, local_index: int) -> int:
        return int(self.member_starts[batch_pos] + local_index)

    def member_rows(self, batch_pos: int) -> np.ndarray:
        start = self.member_starts[batch_pos]
        return np.arange(start, start + self.sizes[batch_pos])


class ExpansionCache:
    """Reusable expansion structures for one hypergraph.

    Assembled batch structures are memoized (keyed by the hyperedge-id
    tuple), which makes repeated full-batch phases free after the first
    epoch while bounding memory for the shuffled node-phase batches.
    """

    def __init__(self, hg, config: GnnConfig, max_cached_batches: int = 16):
        self.hg = hg
        self.config = config
        self.max_cached_batches = max_cached_batches
        self._batches: OrderedDict = OrderedDict()
        if config.expansion == "tree":
            self._root_features = np.stack([
                hg.features[list(e)].mean(axis=0) for e in hg.hyperedges
            ]) if hg.num_hyperedges else np.zeros((0, hg.feature_dim))
        else:
            self._root_features = None
        self._block_cache: dict[int, np.ndarray] = {}

    def _block(self, size: int) -> np.ndarray:
        blk = self._block_cache.get(size)
        if blk is None:
            blk = _local_block(size, self.config.layer_kind,
                               self.config.gin_eps, self.config.expansion)
            self._block_cache[size] = blk
        return blk

    def structure(self, edge_ids) -> BatchStructure:
        key = tuple(int(i) for i in edge_ids)
        hit = self._batches.get(key)
        if hit is not None:
            self._batches.move_to_end(key)
            return hit

        hg = self.hg
        tree = self.config.expansion == "tree"
        blocks, input_rows = [], []
        sizes = np.array([len(hg.hyperedges[i]) for i in key], dtype=np.int64)
        rows_per = sizes + (1 if tree else 0)
        starts = np.concatenate([[0], np.cumsum(rows_per)[:-1]])
        num_rows = int(rows_per.sum())

        for i in key:
            e = list(hg.hyperedges[i])
            blocks.append(self._block(len(e)))
            feats = hg.features[e]
            if tree:
                feats = np.vstack([feats, self._root_features[i][None, :]])
            input_rows.append(feats)

        pool_rows, pool_cols, pool_vals = [], [], []
        for b, (start, s) in enumerate(zip(starts, sizes)):
            pool_rows.extend([b] * s)
            pool_cols.extend(range(start, start + s))
            pool_vals.extend([1.0 / s] * s)

        structure = BatchStructure(
            edge_ids=np.asarray(key, dtype=np.int64),
            sizes=sizes,
            member_starts=starts,
            num_rows=num_rows,
            agg=sp.csr_array(sp.block_diag(blocks, format="csr")),
            pool=sp.csr_array(
                (pool_vals, (pool_rows, pool_cols)),
                shape=(len(key), num_rows)),
            inputs=np.vstack(input_rows),
        )
        self._batches[key] = structure
        if len(self._batches) > self.max_cached_batches:
            self._batches.popitem(last=False)
        return structure


def encode(structure: BatchStructure, params: dict, config: GnnConfig,
           prefix: str = "enc") -> Tensor:
    """Run the stacked layers over a batch structure; returns (R, hidden).

    Inputs are projected before aggregation (AGG @ (H W) instead of
    (AGG @ H) W) so wide raw features are reduced once.
    """
    h = Tensor(structure.inputs)
    for layer in range(config.num_layers):
        key = f"{prefix}.l{layer}"
        if config.layer_kind == "gin":
            z = T.const_matmul(structure.agg, T.matmul(h, params[f"{key}.W1"]))
            z = T.relu(T.add(z, params[f"{key}.b1"]))
            h = T.add(T.matmul(z, params[f"{key}.W2"]), params[f"{key}.b2"])
        elif config.layer_kind == "gcn":
            z = T.const_matmul(structure.agg, T.matmul(h, params[f"{key}.W"]))
            h = T.relu(T.add(z, params[f"{key}.b"]))
        else:
            neigh = T.const_matmul(structure.agg, T.matmul(h, params[f"{key}.Wn"]))
            own = T.matmul(h, params[f"{key}.Ws"])
            h = T.relu(T.add(T.add(own, neigh), params[f"{key}.b"]))
    return h


def pooled_hyperedge_embeddings(structure: BatchStructure, params: dict,
                                config: GnnConfig) -> Tensor:
    """(B, edge_repr_dim) hyperedge representations for the batch.

    One-GNN mode pools the single branch; two-GNN mode concatenates the
    pooled outputs of both branches.
    """
    h_a = encode(structure, params, config, prefix="enc_a")
    pooled_a = T.const_matmul(structure.pool, h_a)
    if config.module_mode == "one":
        return pooled_a
    h_b = encode(structure, params, config, prefix="enc_b")
    pooled_b = T.const_matmul(structure.pool, h_b)
    return T.concat([pooled_a, pooled_b], axis=1)
