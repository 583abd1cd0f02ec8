"""Training procedures: update rules against independent recomputations,
strategy composition, determinism, and the exact ablation identities."""

import numpy as np
import pytest

from hypergene import tensor as T
from hypergene.gnn import ExpansionCache, GnnConfig, init_head
from hypergene.hypergraph import Hypergraph, split_hyperedges
from hypergene.partition import PartitionResult, partition_hyperedges
from hypergene.sampling import SamplingConfig
from hypergene.tensor import Tensor, clone_params
from hypergene.training import (ModelState, RngBundle, TrainConfig, adapt,
                                init_state, pretrain_hyperedge, pretrain_node,
                                predict_logits, run_strategy)
from tests.conftest import random_hypergraph


def labeled_hg(rng, m=12, n=14):
    return random_hypergraph(rng, num_nodes=n, num_edges=m, with_labels=True,
                             num_classes=2)


def toy_three_edges():
    feats = np.array([[1.0, 0.2], [0.1, 1.0], [0.5, 0.5],
                      [1.5, 0.1], [0.2, 0.9]])
    return Hypergraph(5, [(0, 1), (1, 2, 3), (3, 4)], feats)


class TestRngBundle:
    def test_streams_independent_of_consumption_order(self):
        a, b = RngBundle(7), RngBundle(7)
        a.sampling.integers(1000)  # consume one stream
        np.testing.assert_array_equal(a.dropout.integers(100, size=5),
                                      b.dropout.integers(100, size=5))

    def test_distinct_seeds_distinct_streams(self):
        a, b = RngBundle(1), RngBundle(2)
        assert not np.array_equal(a.sampling.integers(1 << 30, size=8),
                                  b.sampling.integers(1 << 30, size=8))


class TestAdaptationStep:
    def test_single_step_is_plain_gradient_descent(self):
        """One adaptation step must equal theta - lr * grad, where the
        gradient comes from an independently assembled forward pass."""
        hg = toy_three_edges()
        gnn = GnnConfig(hidden_dim=4, num_layers=1)
        cfg = TrainConfig(adaptation_steps=1, lr=0.05, strategy="adaptation")
        part = partition_hyperedges(hg, 2, seed=3)

        state = init_state(hg, gnn, RngBundle(0).encoder_init)
        theta0 = clone_params(state.params)

        # reconstruct the fresh head exactly as adapt() will draw it
        head0 = init_head(gnn.edge_repr_dim, gnn.hidden_dim, 2,
                          RngBundle(0).adapt_head, "head_cluster")
        head0 = clone_params(head0)

        # independent loss assembly on clones
        params = clone_params(theta0)
        head = clone_params(head0)
        cache = ExpansionCache(hg, gnn)
        st = cache.structure(np.arange(3))
        from hypergene.gnn import apply_head, pooled_hyperedge_embeddings
        from hypergene.training import cluster_loss
        reps = pooled_hyperedge_embeddings(st, params, gnn)
        logits = apply_head(head, "head_cluster", reps,
                            np.random.default_rng(0), training=False)
        loss = cluster_loss(logits, part.labels)
        T.backward(loss)
        expected = {k: p.data - cfg.lr * (p.grad if p.grad is not None else 0)
                    for k, p in {**params, **head}.items()}

        rngs = RngBundle(0)
        rngs.encoder_init.uniform()  # not used further; streams independent
        adapted = adapt(hg, state, part, cfg, rngs)
        for k, p in adapted.params.items():
            np.testing.assert_allclose(p.data, expected[k], atol=1e-10,
                                       err_msg=k)

    def test_zero_steps_is_identity(self, rng):
        hg = labeled_hg(rng)
        gnn = GnnConfig(hidden_dim=4)
        state = init_state(hg, gnn, RngBundle(1).encoder_init)
        before = clone_params(state.params)
        cfg = TrainConfig(adaptation_steps=0)
        part = partition_hyperedges(hg, 2, seed=0)
        out = adapt(hg, state, part, cfg, RngBundle(1))
        for k in before:
            np.testing.assert_array_equal(out.params[k].data, before[k].data)

    def test_dropout_not_applied(self):
        """Two adapt runs with differently seeded dropout streams agree."""
        hg = toy_three_edges()
        gnn = GnnConfig(hidden_dim=4)
        part = partition_hyperedges(hg, 2, seed=3)
        cfg = TrainConfig(adaptation_steps=3, lr=0.01)
        outs = []
        for seed in (0, 0):
            state = init_state(hg, gnn, RngBundle(5).encoder_init)
            rngs = RngBundle(5)
            rngs.dropout = np.random.default_rng(seed)
            outs.append(adapt(hg, state, part, cfg, rngs).params)
        # and with a scrambled dropout stream
        state = init_state(hg, gnn, RngBundle(5).encoder_init)
        rngs = RngBundle(5)
        rngs.dropout = np.random.default_rng(999)
        scrambled = adapt(hg, state, part, cfg, rngs).params
        for k in outs[0]:
            np.testing.assert_array_equal(outs[0][k].data, outs[1][k].data)
            np.testing.assert_array_equal(outs[0][k].data, scrambled[k].data)


class TestPretextPhases:
    def test_node_pretext_returns_best_loss_params(self, rng):
        hg = labeled_hg(rng)
        cfg = TrainConfig(epochs_node=5, batch_size=4)
        gnn = GnnConfig(hidden_dim=4)
        state = init_state(hg, gnn, RngBundle(2).encoder_init)
        logs = []
        out = pretrain_node(hg, state, cfg, SamplingConfig(), RngBundle(2),
                            logs)
        assert out.provenance == "pretrained"
        assert len(logs) == 5
        assert all(r.phase == "node-pretext" for r in logs)

    def test_hyperedge_pretext_q1_warns_and_skips(self, rng):
        hg = labeled_hg(rng)
        gnn = GnnConfig(hidden_dim=4)
        state = init_state(hg, gnn, RngBundle(0).encoder_init)
        before = clone_params(state.params)
        part = PartitionResult(np.zeros(hg.num_hyperedges, dtype=np.int64),
                               1, 0.0, 0)
        with pytest.warns(UserWarning, match="q=1"):
            out = pretrain_hyperedge(hg, state, part,
                                     TrainConfig(epochs_hyperedge=3),
                                     RngBundle(0))
        for k in before:
            np.testing.assert_array_equal(out.params[k].data, before[k].data)

    def test_exponential_sampling_path_runs(self, rng):
        hg = labeled_hg(rng)
        cfg = TrainConfig(epochs_node=2, batch_size=4)
        samp = SamplingConfig(strategy="exponential", path_k=2)
        state = init_state(hg, GnnConfig(hidden_dim=4),
                           RngBundle(3).encoder_init)
        logs = []
        pretrain_node(hg, state, cfg, samp, RngBundle(3), logs)
        assert len(logs) == 2


class TestStrategies:
    def quick_cfg(self, strategy, **kw):
        base = dict(epochs_node=2, epochs_hyperedge=2, epochs_finetune=4,
                    batch_size=8, adaptation_steps=2, seed=11)
        base.update(kw)
        return TrainConfig(strategy=strategy, **base)

    def run(self, rng_seed, strategy, **kw):
        rng = np.random.default_rng(rng_seed)
        hg = labeled_hg(rng, m=14)
        split = split_hyperedges(hg, seed=1)
        y_train = hg.labels[split.train]
        y_val = hg.labels[split.val]
        cfg = self.quick_cfg(strategy, **kw)
        out = run_strategy(hg, split, y_train, y_val, cfg,
                           GnnConfig(hidden_dim=6), SamplingConfig(),
                           num_classes=2)
        return hg, split, out

    def test_phase_composition_per_strategy(self):
        expected = {
            "traditional": {"node-pretext", "hyperedge-pretext", "finetune"},
            "adaptation": {"node-pretext", "adaptation", "finetune"},
            "node-only": {"node-pretext", "finetune"},
            "no-pretrain": {"finetune"},
            "joint": {"joint"},
        }
        for strategy, phases in expected.items():
            _, _, out = self.run(0, strategy)
            assert {r.phase for r in out.logs} == phases, strategy

    def test_hyperedge_only_both_settings(self):
        _, _, out = self.run(0, "hyperedge-only")
        assert {r.phase for r in out.logs} == {"adaptation", "finetune"}
        _, _, out = self.run(0, "hyperedge-only", setting="inductive")
        assert {r.phase for r in out.logs} == {"hyperedge-pretext", "finetune"}

    def test_traditional_uses_two_branches_by_default(self):
        _, _, out = self.run(0, "traditional")
        assert any(k.startswith("enc_b.") for k in out.state.params)
        _, _, out2 = self.run(0, "adaptation")
        assert not any(k.startswith("enc_b.") for k in out2.state.params)

    def test_same_seed_bitwise_identical(self):
        _, _, a = self.run(4, "adaptation")
        _, _, b = self.run(4, "adaptation")
        for k in a.state.params:
            np.testing.assert_array_equal(a.state.params[k].data,
                                          b.state.params[k].data)
        assert [r.loss for r in a.logs] == [r.loss for r in b.logs]

    @pytest.mark.filterwarnings("ignore:alpha=beta=0")
    def test_joint_zero_weights_equals_finetune(self):
        _, _, joint = self.run(6, "joint", alpha=0.0, beta=0.0)
        _, _, plain = self.run(6, "no-pretrain")
        for k in plain.state.params:
            np.testing.assert_array_equal(joint.state.params[k].data,
                                          plain.state.params[k].data)
        joint_losses = [r.loss for r in joint.logs]
        plain_losses = [r.loss for r in plain.logs]
        assert joint_losses == plain_losses

    def test_adaptation_zero_steps_equals_node_only(self):
        _, _, ada = self.run(7, "adaptation", adaptation_steps=0)
        _, _, node = self.run(7, "node-only")
        for k in node.state.params:
            np.testing.assert_array_equal(ada.state.params[k].data,
                                          node.state.params[k].data)

    def test_checkpoints_cover_phases(self):
        _, _, out = self.run(8, "adaptation")
        assert {"init", "post-node-pretext", "post-adaptation",
                "post-finetune"} <= set(out.checkpoints)

    def test_predictions_shape_and_range(self):
        hg, split, out = self.run(9, "no-pretrain")
        logits = predict_logits(hg, split.test, out.state.params,
                                out.head_task, out.state.gnn)
        assert logits.shape == (len(split.test), 2)
        assert np.all(np.isfinite(logits))

    def test_best_val_is_max_over_epochs(self):
        _, _, out = self.run(10, "no-pretrain")
        vals = [r.val_accuracy for r in out.logs
                if r.val_accuracy is not None]
        assert out.best_val == pytest.approx(max(vals))


class TestConfigValidation:
    def test_rejects_unknown_strategy(self):
        with pytest.raises(ValueError):
            TrainConfig(strategy="magic")

    def test_rejects_negative_values(self):
        for kw in ({"epochs_node": -1}, {"batch_size": 0}, {"lr": 0.0},
                   {"adaptation_steps": -1}, {"alpha": -0.1},
                   {"clusters": 0}, {"module_mode": "three"},
                   {"setting": "semi"}):
            with pytest.raises(ValueError):
                TrainConfig(**kw)

    def test_resolved_defaults(self):
        assert TrainConfig(strategy="traditional").resolved_setting == "inductive"
        assert TrainConfig(strategy="traditional").resolved_module_mode == "two"
        assert TrainConfig(strategy="adaptation").resolved_setting == "transductive"
        assert TrainConfig(strategy="adaptation").resolved_module_mode == "one"
        forced = TrainConfig(strategy="traditional", setting="transductive")
        assert forced.resolved_module_mode == "one"
