"""Pretext losses and the training procedures built on them.

Phases: node-context pre-training, cluster-membership pre-training,
few-step adaptation on test hyperedges, supervised fine-tuning, and joint
training.  Fine-tuning and joint training share one loop; the pretext
terms are guarded so zero weights consume no extra randomness and the
joint run with alpha=beta=0 reproduces plain fine-tuning bit for bit.

Only the encoder parameters (the Theta carried between phases) survive a
phase; every phase creates fresh adjustment heads.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import tensor as T
from .gnn import (ExpansionCache, GnnConfig, apply_head, encode, init_encoder,
                  init_head, pooled_hyperedge_embeddings)
from .hypergraph import Hypergraph, normalize_adjacency
from .optim import Adam, ReduceOnPlateau
from .partition import PartitionResult, partition_hyperedges
from .sampling import SamplingConfig, exp_sampling_matrix, path_count_matrix
from .tensor import Tensor, clone_params

STRATEGIES = ("traditional", "adaptation", "joint", "no-pretrain",
              "node-only", "hyperedge-only")


@dataclass(frozen=True)
class TrainConfig:
    epochs_node: int = 50
    epochs_hyperedge: int = 50
    epochs_finetune: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    adaptation_steps: int = 5
    clusters: int | None = None
    alpha: float = 1.0
    beta: float = 1.0
    strategy: str = "adaptation"
    setting: str | None = None
    module_mode: str | None = None
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.setting not in (None, "transductive", "inductive"):
            raise ValueError("setting must be 'transductive' or 'inductive'")
        for name in ("epochs_node", "epochs_hyperedge", "epochs_finetune"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.adaptation_steps < 0:
            raise ValueError("adaptation_steps must be >= 0")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if self.clusters is not None and self.clusters < 1:
            raise ValueError("clusters must be >= 1")
        if self.module_mode not in (None, "one", "two"):
            raise ValueError("module_mode must be 'one' or 'two'")

    @property
    def resolved_setting(self) -> str:
        if self.setting is not None:
            return self.setting
        return "inductive" if self.strategy == "traditional" else "transductive"

    @property
    def resolved_module_mode(self) -> str:
        if self.module_mode is not None:
            return self.module_mode
        return "two" if self.resolved_setting == "inductive" else "one"


@dataclass
class LogRow:
    epoch: int
    phase: str
    loss: float
    val_accuracy: float | None
    lr: float
    wall_ms: float


@dataclass
class ModelState:
    """Encoder parameters Theta plus how they were obtained."""
    params: dict[str, Tensor]
    gnn: GnnConfig
    provenance: str = "random-init"


class RngBundle:
    """Named, independently seeded random streams for one run.

    Fixed spawn order keeps every run reproducible regardless of which
    phases execute.
    """

    NAMES = ("encoder_init", "head_node", "head_cluster", "head_task",
             "sampling", "dropout", "shuffle", "partition", "adapt_head")

    def __init__(self, seed: int):
        self.seed = seed
        children = np.random.SeedSequence(seed).spawn(len(self.NAMES))
        for name, child in zip(self.NAMES, children):
            setattr(self, name, np.random.default_rng(child))


def init_state(hg: Hypergraph, gnn: GnnConfig, rng: np.random.Generator) -> ModelState:
    params = init_encoder(gnn, hg.feature_dim, rng, prefix="enc_a")
    if gnn.module_mode == "two":
        params.update(init_encoder(gnn, hg.feature_dim, rng, prefix="enc_b"))
    return ModelState(params=params, gnn=gnn)


# ---------------------------------------------------------------------------
# loss functions (exposed for oracle tests)


def node_context_loss(h_seed: Tensor, h_ctx: Tensor, h_neg: Tensor,
                      num_negatives: int) -> Tensor:
    """Binary cross-entropy over seed/context and negative/context scores.

    h_seed, h_ctx: (P, d) adjusted embeddings; h_neg: (P*J, d) where the
    J negatives of pair i occupy rows i*J..(i+1)*J-1.  Per pair the
    positive term appears once per negative, mirroring the double sum of
    the training objective; the total is averaged over the P pairs.
    """
    p = h_seed.shape[0]
    if p == 0:
        raise ValueError("node pretext loss needs at least one pair")
    j = num_negatives
    pos = T.tsum(T.mul(h_seed, h_ctx), axis=1)
    ctx_rep = T.gather_rows(h_ctx, np.repeat(np.arange(p), j))
    neg = T.tsum(T.mul(h_neg, ctx_rep), axis=1)
    pos_term = T.tsum(T.logsigmoid(pos))
    neg_term = T.tsum(T.logsigmoid(T.mul(neg, -1.0)))
    return T.mul(T.add(T.mul(pos_term, float(j)), neg_term), -1.0 / p)


def cluster_loss(logits: Tensor, labels) -> Tensor:
    """Mean categorical cross-entropy against partition pseudo-labels."""
    labels = np.asarray(labels, dtype=np.int64)
    b, q = logits.shape
    if labels.shape != (b,):
        raise ValueError("one label per logit row required")
    if labels.min() < 0 or labels.max() >= q:
        raise ValueError(f"cluster label outside [0, {q})")
    logp = T.log_softmax(logits, axis=1)
    picked = T.mul(logp, _one_hot(labels, q))
    return T.mul(T.tsum(picked), -1.0 / b)


def _one_hot(labels: np.ndarray, q: int) -> np.ndarray:
    out = np.zeros((len(labels), q))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def _cosine(u: Tensor, v: Tensor) -> Tensor:
    dot = T.tsum(T.mul(u, v), axis=1)
    nu = T.sqrt(T.tsum(T.mul(u, u), axis=1))
    nv = T.sqrt(T.tsum(T.mul(v, v), axis=1))
    return T.div(dot, T.add(T.mul(nu, nv), 1e-12))


def cosine_pair_loss(h_seed: Tensor, h_ctx: Tensor, h_neg: Tensor,
                     num_negatives: int, margin: float = 0.5) -> Tensor:
    """Cosine embedding objective: (1 - cos) for seed/context pairs,
    max(0, cos - margin) for negative/context pairs; summed as written."""
    if not 0.0 <= margin < 1.0:
        raise ValueError(f"margin must be in [0, 1), got {margin}")
    p = h_seed.shape[0]
    ctx_rep = T.gather_rows(h_ctx, np.repeat(np.arange(p), num_negatives))
    pos = T.tsum(T.add(T.mul(_cosine(h_seed, h_ctx), -1.0), 1.0))
    neg = T.tsum(T.relu(T.add(_cosine(h_neg, ctx_rep), -margin)))
    return T.add(pos, neg)


def gram_regression_loss(reps: Tensor, target_gram: np.ndarray) -> Tensor:
    """Frobenius objective || reps @ reps^T - target ||_F^2.

    Hyperedge representations are rows, so the pairwise-similarity gram is
    reps @ reps^T, matched against the path-count matrix slice."""
    target = np.asarray(target_gram, dtype=np.float64)
    b = reps.shape[0]
    if target.shape != (b, b):
        raise ValueError(f"target gram must be ({b}, {b}), got {target.shape}")
    resid = T.add(T.matmul(reps, T.transpose(reps)), -target)
    return T.tsum(T.mul(resid, resid))


# ---------------------------------------------------------------------------
# node-level pretext plumbing


def _eligible_for_pairs(hg: Hypergraph) -> np.ndarray:
    return np.flatnonzero(hg.sizes() >= 2)


def _context_pool(structure, seed_locals, batch_positions) -> sp.csr_array:
    """(P, R) matrix averaging each pair's context rows (seed excluded)."""
    rows, cols, vals = [], [], []
    for p, (b, s_local) in enumerate(zip(batch_positions, seed_locals)):
        size = structure.sizes[b]
        start = structure.member_starts[b]
        w = 1.0 / (size - 1)
        for local in range(size):
            if local != s_local:
                rows.append(p)
                cols.append(start + local)
                vals.append(w)
    return sp.csr_array((vals, (rows, cols)),
                        shape=(len(batch_positions), structure.num_rows))


def _node_batch_loss(hg, cache: ExpansionCache, state: ModelState,
                     head_params: dict, batch_ids: np.ndarray,
                     samp: SamplingConfig, rng_sample, rng_drop,
                     exp_probs: np.ndarray | None, training: bool = True):
    """Node-context loss over the pairs of one batch of hyperedges.

    Returns (loss Tensor, pair count); (None, 0) when no batch member has
    |e| >= 2.  Uniform negatives are drawn from the batch's own member
    rows, so they reuse embeddings already computed for the batch;
    exponential negatives encode their source hyperedges separately.
    """
    gnn = state.gnn
    structure = cache.structure(batch_ids)
    sizes = structure.sizes
    positions = np.flatnonzero(sizes >= 2)
    if len(positions) == 0:
        return None, 0

    seed_locals = np.array([int(rng_sample.integers(sizes[b])) for b in positions])
    seed_rows = np.array([structure.member_row(b, s)
                          for b, s in zip(positions, seed_locals)])

    h_a = encode(structure, state.params, gnn, "enc_a")
    h_neg_source = encode(structure, state.params, gnn, "enc_b") \
        if gnn.module_mode == "two" else h_a

    j = samp.num_negatives
    if samp.strategy == "uniform":
        member_rows = np.concatenate([structure.member_rows(b)
                                      for b in range(len(batch_ids))])
        block_start = np.concatenate([[0], np.cumsum(sizes)])
        total = int(block_start[-1])
        neg_rows = np.empty(len(positions) * j, dtype=np.int64)
        for p, b in enumerate(positions):
            lo, hi = block_start[b], block_start[b + 1]
            n_other = total - (hi - lo)
            if n_other == 0:
                raise ValueError(
                    "uniform sampling needs another hyperedge in the batch")
            draws = rng_sample.integers(n_other, size=j)
            draws = np.where(draws >= lo, draws + (hi - lo), draws)
            neg_rows[p * j:(p + 1) * j] = member_rows[draws]
        h_negs = T.gather_rows(h_neg_source, neg_rows)
    else:
        if exp_probs is None:
            raise ValueError("exponential sampling needs a probability matrix")
        sources = np.empty(len(positions) * j, dtype=np.int64)
        node_locals = np.empty(len(positions) * j, dtype=np.int64)
        for p, b in enumerate(positions):
            anchor = int(batch_ids[b])
            src = rng_sample.choice(exp_probs.shape[0], size=j,
                                    p=exp_probs[anchor])
            sources[p * j:(p + 1) * j] = src
            for t_idx, s_edge in enumerate(src):
                node_locals[p * j + t_idx] = int(
                    rng_sample.integers(len(hg.hyperedges[s_edge])))
        unique_sources, inverse = np.unique(sources, return_inverse=True)
        neg_structure = cache.structure(unique_sources)
        prefix = "enc_b" if gnn.module_mode == "two" else "enc_a"
        h_neg_all = encode(neg_structure, state.params, gnn, prefix)
        neg_rows = neg_structure.member_starts[inverse] + node_locals
        h_negs = T.gather_rows(h_neg_all, neg_rows)

    seeds = T.gather_rows(h_a, seed_rows)
    ctx = T.const_matmul(_context_pool(structure, seed_locals, positions), h_a)

    p_count = len(positions)
    stacked = T.concat([seeds, ctx, h_negs], axis=0)
    adjusted = apply_head(head_params, "head_node", stacked, rng_drop, training)
    hs = T.gather_rows(adjusted, np.arange(p_count))
    hc = T.gather_rows(adjusted, np.arange(p_count, 2 * p_count))
    hn = T.gather_rows(adjusted, np.arange(2 * p_count, 2 * p_count + p_count * j))
    return node_context_loss(hs, hc, hn, j), p_count


def _batches(ids: np.ndarray, batch_size: int, rng) -> list[np.ndarray]:
    """Shuffled batches; a trailing singleton folds into the previous batch
    so every batch offers at least one other hyperedge for sampling."""
    order = rng.permutation(ids)
    chunks = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


# ---------------------------------------------------------------------------
# phases


def pretrain_node(hg: Hypergraph, state: ModelState, cfg: TrainConfig,
                  samp: SamplingConfig, rngs: RngBundle,
                  log: list[LogRow] | None = None,
                  cache: ExpansionCache | None = None) -> ModelState:
    """Node-context pre-training on the given (train) hypergraph.

    Runs epochs_node epochs of Adam over shuffled batches, resampling
    seeds, contexts, and negatives every epoch, and returns the encoder
    checkpoint with the best mean epoch loss.
    """
    eligible = _eligible_for_pairs(hg)
    if len(eligible) == 0:
        raise ValueError("node pretext needs a hyperedge with |e| >= 2")
    if cfg.epochs_node == 0:
        return state

    cache = cache or ExpansionCache(hg, state.gnn)
    head = init_head(state.gnn.hidden_dim, state.gnn.hidden_dim,
                     state.gnn.hidden_dim, rngs.head_node, "head_node")
    opt = Adam({**state.params, **head}, lr=cfg.lr)
    sched = ReduceOnPlateau(cfg.lr)

    exp_probs = None
    if samp.strategy == "exponential":
        a_norm = normalize_adjacency(hg.hyperedge_adjacency(zero_diagonal=True))
        exp_probs = exp_sampling_matrix(path_count_matrix(a_norm, samp.path_k),
                                        samp.gamma)

    best_loss, best_params = np.inf, clone_params(state.params)
    for epoch in range(cfg.epochs_node):
        t0 = time.perf_counter()
        total, pair_count = 0.0, 0
        for batch in _batches(eligible, cfg.batch_size, rngs.shuffle):
            loss, pairs = _node_batch_loss(hg, cache, state, head, batch,
                                           samp, rngs.sampling, rngs.dropout,
                                           exp_probs)
            if loss is None:
                continue
            opt.zero_grad()
            T.backward(loss)
            opt.step()
            total += float(loss.data) * pairs
            pair_count += pairs
        mean_loss = total / max(pair_count, 1)
        opt.lr = sched.step(mean_loss)
        if mean_loss < best_loss:
            best_loss = mean_loss
            best_params = clone_params(state.params)
        if log is not None:
            log.append(LogRow(epoch, "node-pretext", mean_loss, None, opt.lr,
                              (time.perf_counter() - t0) * 1e3))
    return ModelState(params=best_params, gnn=state.gnn, provenance="pretrained")


def pretrain_hyperedge(hg: Hypergraph, state: ModelState,
                       partition: PartitionResult, cfg: TrainConfig,
                       rngs: RngBundle, log: list[LogRow] | None = None,
                       cache: ExpansionCache | None = None) -> ModelState:
    """Cluster-membership pre-training (full second stage, inductive)."""
    if partition.q < 1:
        raise ValueError("partition must have at least one cluster")
    if partition.q == 1:
        warnings.warn("q=1 makes the cluster pretext a constant; skipping")
        return state
    if cfg.epochs_hyperedge == 0:
        return state

    cache = cache or ExpansionCache(hg, state.gnn)
    head = init_head(state.gnn.edge_repr_dim, state.gnn.hidden_dim,
                     partition.q, rngs.head_cluster, "head_cluster")
    opt = Adam({**state.params, **head}, lr=cfg.lr)
    sched = ReduceOnPlateau(cfg.lr)
    all_ids = np.arange(hg.num_hyperedges)

    for epoch in range(cfg.epochs_hyperedge):
        t0 = time.perf_counter()
        total, count = 0.0, 0
        for batch in _batches(all_ids, cfg.batch_size, rngs.shuffle):
            structure = cache.structure(batch)
            reps = pooled_hyperedge_embeddings(structure, state.params, state.gnn)
            logits = apply_head(head, "head_cluster", reps, rngs.dropout,
                                training=True)
            loss = cluster_loss(logits, partition.labels[batch])
            opt.zero_grad()
            T.backward(loss)
            opt.step()
            total += float(loss.data) * len(batch)
            count += len(batch)
        mean_loss = total / count
        opt.lr = sched.step(mean_loss)
        if log is not None:
            log.append(LogRow(epoch, "hyperedge-pretext", mean_loss, None,
                              opt.lr, (time.perf_counter() - t0) * 1e3))
    return ModelState(params=state.params, gnn=state.gnn,
                      provenance="pretrained")


def adapt(hg: Hypergraph, state: ModelState, partition: PartitionResult,
          cfg: TrainConfig, rngs: RngBundle,
          log: list[LogRow] | None = None,
          cache: ExpansionCache | None = None) -> ModelState:
    """Exactly `adaptation_steps` full-batch plain gradient-descent steps
    of the cluster pretext on the given (test) hypergraph.

    Updates the encoder and the fresh cluster head with learning rate lr;
    no Adam state, no dropout, and no downstream labels involved.
    """
    if cfg.adaptation_steps == 0:
        return state
    if partition.q == 1:
        return state

    cache = cache or ExpansionCache(hg, state.gnn)
    head = init_head(state.gnn.edge_repr_dim, state.gnn.hidden_dim,
                     partition.q, rngs.adapt_head, "head_cluster")
    params = {**state.params, **head}
    all_ids = np.arange(hg.num_hyperedges)

    for step in range(cfg.adaptation_steps):
        t0 = time.perf_counter()
        structure = cache.structure(all_ids)
        reps = pooled_hyperedge_embeddings(structure, state.params, state.gnn)
        logits = apply_head(head, "head_cluster", reps, rngs.dropout,
                            training=False)
        loss = cluster_loss(logits, partition.labels)
        for p in params.values():
            p.grad = None
        T.backward(loss)
        for p in params.values():
            if p.grad is not None:
                p.data -= cfg.lr * p.grad
        if log is not None:
            log.append(LogRow(step, "adaptation", float(loss.data), None,
                              cfg.lr, (time.perf_counter() - t0) * 1e3))
    return ModelState(params=state.params, gnn=state.gnn,
                      provenance="pretrained")


def predict_logits(hg: Hypergraph, edge_ids, params: dict, head: dict,
                   gnn: GnnConfig, cache: ExpansionCache | None = None) -> np.ndarray:
    """Eval-mode class logits for the given hyperedges."""
    cache = cache or ExpansionCache(hg, gnn)
    structure = cache.structure(np.asarray(edge_ids, dtype=np.int64))
    with T.no_grad():
        reps = pooled_hyperedge_embeddings(structure, params, gnn)
        logits = apply_head(head, "head_task", reps,
                            np.random.default_rng(0), training=False)
    return logits.data


def _supervised_loop(hg: Hypergraph, hg_train: Hypergraph,
                     train_ids: np.ndarray, val_ids: np.ndarray,
                     y_train: np.ndarray, y_val: np.ndarray,
                     state: ModelState, cfg: TrainConfig,
                     samp: SamplingConfig, rngs: RngBundle,
                     log: list[LogRow], phase: str,
                     alpha: float, beta: float,
                     train_partition: PartitionResult | None,
                     num_classes: int | None = None):
    """Shared loop behind finetune (alpha=beta=0) and joint training.

    Pretext terms attach to the same batches; their guards make sure a
    zero weight consumes no randomness, so fine-tuning trajectories are
    unchanged by the shared implementation.
    """
    if num_classes is None:
        num_classes = int(max(y_train.max(),
                              y_val.max() if len(y_val) else 0)) + 1
    gnn = state.gnn
    head_task = init_head(gnn.edge_repr_dim, gnn.hidden_dim, num_classes,
                          rngs.head_task, "head_task")
    head_node = init_head(gnn.hidden_dim, gnn.hidden_dim, gnn.hidden_dim,
                          rngs.head_node, "head_node") if alpha > 0 else {}
    head_cluster = init_head(gnn.edge_repr_dim, gnn.hidden_dim,
                             train_partition.q, rngs.head_cluster,
                             "head_cluster") if beta > 0 else {}

    params = {**state.params, **head_task, **head_node, **head_cluster}
    opt = Adam(params, lr=cfg.lr)

    cache_full = ExpansionCache(hg, gnn)
    cache_train = ExpansionCache(hg_train, gnn)

    exp_probs = None
    if alpha > 0 and samp.strategy == "exponential":
        a_norm = normalize_adjacency(
            hg_train.hyperedge_adjacency(zero_diagonal=True))
        exp_probs = exp_sampling_matrix(path_count_matrix(a_norm, samp.path_k),
                                        samp.gamma)

    local_ids = np.arange(len(train_ids))
    best_val, best_params, best_epoch, wait = -1.0, clone_params(params), -1, 0

    for epoch in range(cfg.epochs_finetune):
        t0 = time.perf_counter()
        total, count = 0.0, 0
        for batch in _batches(local_ids, cfg.batch_size, rngs.shuffle):
            structure = cache_train.structure(batch)
            reps = pooled_hyperedge_embeddings(structure, state.params, gnn)
            logits = apply_head(head_task, "head_task", reps, rngs.dropout,
                                training=True)
            loss = cluster_loss(logits, y_train[batch])
            if alpha > 0:
                node_loss, pairs = _node_batch_loss(
                    hg_train, cache_train, state, head_node, batch, samp,
                    rngs.sampling, rngs.dropout, exp_probs)
                if node_loss is not None:
                    loss = T.add(loss, T.mul(node_loss, alpha))
            if beta > 0:
                c_logits = apply_head(head_cluster, "head_cluster", reps,
                                      rngs.dropout, training=True)
                loss = T.add(loss, T.mul(
                    cluster_loss(c_logits, train_partition.labels[batch]), beta))
            opt.zero_grad()
            T.backward(loss)
            opt.step()
            total += float(loss.data) * len(batch)
            count += len(batch)

        val_acc = float(np.mean(
            predict_logits(hg, val_ids, state.params, head_task, gnn,
                           cache_full).argmax(axis=1) == y_val)) \
            if len(val_ids) else 0.0
        mean_loss = total / max(count, 1)
        if log is not None:
            log.append(LogRow(epoch, phase, mean_loss, val_acc, opt.lr,
                              (time.perf_counter() - t0) * 1e3))
        if val_acc > best_val:
            best_val, best_epoch, wait = val_acc, epoch, 0
            best_params = clone_params(params)
        else:
            wait += 1
            if wait >= cfg.patience:
                break

    for name, value in best_params.items():
        params[name].data = value.data
    head_final = {k: params[k] for k in head_task}
    return head_final, best_val, best_epoch


def finetune(hg: Hypergraph, train_ids, val_ids, y_train, y_val,
             state: ModelState, cfg: TrainConfig, rngs: RngBundle,
             log: list[LogRow] | None = None,
             num_classes: int | None = None):
    """Supervised training of encoder plus a fresh task head.

    Adam with early stopping on best validation accuracy (patience
    cfg.patience, cap cfg.epochs_finetune); the best-validation snapshot
    of all trained parameters is restored before returning.
    """
    train_ids = np.asarray(train_ids, dtype=np.int64)
    val_ids = np.asarray(val_ids, dtype=np.int64)
    y_train = np.asarray(y_train, dtype=np.int64)
    y_val = np.asarray(y_val, dtype=np.int64)
    if y_train.min(initial=0) < 0:
        raise ValueError("labels must be non-negative")
    hg_train = hg.select(train_ids)
    log = log if log is not None else []
    return _supervised_loop(hg, hg_train, train_ids, val_ids, y_train, y_val,
                            state, cfg, SamplingConfig(), rngs, log,
                            "finetune", alpha=0.0, beta=0.0,
                            train_partition=None, num_classes=num_classes)


def joint_train(hg: Hypergraph, train_ids, val_ids, y_train, y_val,
                state: ModelState, cfg: TrainConfig, samp: SamplingConfig,
                rngs: RngBundle, log: list[LogRow] | None = None,
                num_classes: int | None = None):
    """Single loop optimizing alpha*L_node + beta*L_cluster + L_task."""
    train_ids = np.asarray(train_ids, dtype=np.int64)
    val_ids = np.asarray(val_ids, dtype=np.int64)
    y_train = np.asarray(y_train, dtype=np.int64)
    y_val = np.asarray(y_val, dtype=np.int64)
    if cfg.alpha == 0 and cfg.beta == 0:
        warnings.warn("alpha=beta=0 reduces joint training to fine-tuning")
    hg_train = hg.select(train_ids)
    partition = None
    if cfg.beta > 0:
        q = cfg.clusters or max(2, int(y_train.max()) + 1)
        partition = partition_hyperedges(hg_train, q,
                                         int(rngs.partition.integers(2 ** 31)))
    log = log if log is not None else []
    return _supervised_loop(hg, hg_train, train_ids, val_ids, y_train, y_val,
                            state, cfg, samp, rngs, log, "joint",
                            alpha=cfg.alpha, beta=cfg.beta,
                            train_partition=partition, num_classes=num_classes)


# ---------------------------------------------------------------------------
# strategy driver


@dataclass
class StrategyOutcome:
    """Everything a run produces besides test evaluation."""
    state: ModelState
    head_task: dict
    logs: list[LogRow]
    checkpoints: dict[str, dict[str, Tensor]]
    partitions: dict[str, PartitionResult]
    best_val: float
    best_epoch: int


def run_strategy(hg: Hypergraph, split, y_train, y_val, cfg: TrainConfig,
                 gnn: GnnConfig | None = None,
                 samp: SamplingConfig | None = None,
                 num_classes: int | None = None) -> StrategyOutcome:
    """Execute the phases of cfg.strategy; test labels never enter here.

    Strategies: 'traditional' runs both pretexts then fine-tunes
    (inductive, two branches by default); 'adaptation' replaces the second
    pretext with a few gradient steps on the test hyperedges (transductive,
    one branch); 'joint' optimizes the weighted sum in one loop;
    'no-pretrain', 'node-only', and 'hyperedge-only' are the ablations.
    """
    rngs = RngBundle(cfg.seed)
    if gnn is None:
        gnn = GnnConfig()
    gnn = replace(gnn, module_mode=cfg.resolved_module_mode)
    samp = samp or SamplingConfig()

    state = init_state(hg, gnn, rngs.encoder_init)
    logs: list[LogRow] = []
    checkpoints = {"init": clone_params(state.params)}
    partitions: dict[str, PartitionResult] = {}

    y_train = np.asarray(y_train, dtype=np.int64)
    y_val = np.asarray(y_val, dtype=np.int64)
    hg_train = hg.select(split.train)
    q = cfg.clusters or max(2, (num_classes or int(y_train.max()) + 1))
    transductive = cfg.resolved_setting == "transductive"
    strategy = cfg.strategy

    if strategy in ("traditional", "adaptation", "node-only"):
        state = pretrain_node(hg_train, state, cfg, samp, rngs, logs)
        checkpoints["post-node-pretext"] = clone_params(state.params)

    if strategy == "traditional" or (strategy == "hyperedge-only"
                                     and not transductive):
        part = partition_hyperedges(hg_train, q,
                                    int(rngs.partition.integers(2 ** 31)))
        partitions["train"] = part
        state = pretrain_hyperedge(hg_train, state, part, cfg, rngs, logs)
        checkpoints["post-hyperedge-pretext"] = clone_params(state.params)
    elif strategy in ("adaptation", "hyperedge-only") and transductive \
            and cfg.adaptation_steps > 0:
        hg_test = hg.select(split.test)
        q_test = min(q, hg_test.num_hyperedges)
        part = partition_hyperedges(hg_test, q_test,
                                    int(rngs.partition.integers(2 ** 31)))
        partitions["test"] = part
        state = adapt(hg_test, state, part, cfg, rngs, logs)
        checkpoints["post-adaptation"] = clone_params(state.params)

    if strategy == "joint":
        head_task, best_val, best_epoch = joint_train(
            hg, split.train, split.val, y_train, y_val, state, cfg, samp,
            rngs, logs, num_classes=num_classes)
    else:
        head_task, best_val, best_epoch = finetune(
            hg, split.train, split.val, y_train, y_val, state, cfg, rngs,
            logs, num_classes=num_classes)
    checkpoints["post-finetune"] = clone_params({**state.params, **head_task})

    return StrategyOutcome(state=state, head_task=head_task, logs=logs,
                           checkpoints=checkpoints, partitions=partitions,
                           best_val=best_val, best_epoch=best_epoch)
