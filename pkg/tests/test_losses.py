"""Pretext losses against literal scalar-loop recomputations.

The oracles below use plain Python floats and math functions, no vector
shortcuts, so they share no code with the implementations under test.
"""

import math

import numpy as np
import pytest

from hypergene.tensor import Tensor, gradient_check
from hypergene.training import (cluster_loss, cosine_pair_loss,
                                gram_regression_loss, node_context_loss)


def log_sigmoid(x: float) -> float:
    # stable in both tails
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


def oracle_node_context(seeds, ctxs, negs, j):
    p = len(seeds)
    total = 0.0
    for i in range(p):
        pos_score = sum(a * b for a, b in zip(seeds[i], ctxs[i]))
        for k in range(j):
            neg_score = sum(a * b for a, b in zip(negs[i * j + k], ctxs[i]))
            total += log_sigmoid(pos_score) + log_sigmoid(-neg_score)
    return -total / p


def oracle_cluster(logits, labels):
    total = 0.0
    for row, label in zip(logits, labels):
        mx = max(row)
        lse = mx + math.log(sum(math.exp(v - mx) for v in row))
        total += -(row[label] - lse)
    return total / len(labels)


def oracle_cosine(seeds, ctxs, negs, j, margin):
    def cos(u, v):
        dot = sum(a * b for a, b in zip(u, v))
        nu = math.sqrt(sum(a * a for a in u))
        nv = math.sqrt(sum(b * b for b in v))
        return dot / (nu * nv + 1e-12)

    total = 0.0
    for i in range(len(seeds)):
        total += 1.0 - cos(seeds[i], ctxs[i])
        for k in range(j):
            total += max(0.0, cos(negs[i * j + k], ctxs[i]) - margin)
    return total


def oracle_gram(reps, target):
    b, d = len(reps), len(reps[0])
    total = 0.0
    for i in range(b):
        for k in range(b):
            gram = sum(reps[i][l] * reps[k][l] for l in range(d))
            total += (gram - target[i][k]) ** 2
    return total


def random_instance(rng, p=None, j=None, d=None):
    p = p or int(rng.integers(1, 7))
    j = j or int(rng.integers(1, 5))
    d = d or int(rng.integers(2, 6))
    return (rng.normal(size=(p, d)), rng.normal(size=(p, d)),
            rng.normal(size=(p * j, d)), j)


class TestNodeContextLoss:
    def test_matches_scalar_oracle(self, rng):
        for _ in range(30):
            seeds, ctxs, negs, j = random_instance(rng)
            got = node_context_loss(Tensor(seeds), Tensor(ctxs),
                                    Tensor(negs), j)
            want = oracle_node_context(seeds.tolist(), ctxs.tolist(),
                                       negs.tolist(), j)
            assert abs(float(got.data) - want) < 1e-10

    def test_positive_term_weighted_per_negative(self, rng):
        """With J negatives the positive term enters J times."""
        seeds, ctxs, _, _ = random_instance(rng, p=3, j=1, d=4)
        far = np.full((3 * 1, 4), 100.0)  # logsigmoid(-100) ~ 0
        one = float(node_context_loss(Tensor(seeds), Tensor(ctxs),
                                      Tensor(-far), 1).data)
        far3 = np.full((3 * 3, 4), 100.0)
        three = float(node_context_loss(Tensor(seeds), Tensor(ctxs),
                                        Tensor(-far3), 3).data)
        assert three == pytest.approx(3 * one, rel=1e-9)

    def test_empty_rejected(self):
        empty = Tensor(np.zeros((0, 3)))
        with pytest.raises(ValueError):
            node_context_loss(empty, empty, empty, 2)

    def test_gradients(self, rng):
        seeds, ctxs, negs, j = random_instance(rng, p=4, j=3, d=3)
        ts = Tensor(seeds, requires_grad=True)
        tc = Tensor(ctxs, requires_grad=True)
        tn = Tensor(negs, requires_grad=True)
        err = gradient_check(lambda: node_context_loss(ts, tc, tn, j),
                             [ts, tc, tn])
        assert err < 1e-5


class TestClusterLoss:
    def test_matches_scalar_oracle(self, rng):
        for _ in range(30):
            b = int(rng.integers(1, 8))
            q = int(rng.integers(2, 6))
            logits = rng.normal(size=(b, q)) * 3
            labels = rng.integers(0, q, size=b)
            got = float(cluster_loss(Tensor(logits), labels).data)
            want = oracle_cluster(logits.tolist(), labels.tolist())
            assert abs(got - want) < 1e-10

    def test_perfect_prediction_near_zero(self):
        logits = np.array([[50.0, 0.0], [0.0, 50.0]])
        got = float(cluster_loss(Tensor(logits), [0, 1]).data)
        assert got < 1e-9

    def test_label_range_validated(self, rng):
        logits = Tensor(rng.normal(size=(2, 3)))
        with pytest.raises(ValueError):
            cluster_loss(logits, [0, 3])
        with pytest.raises(ValueError):
            cluster_loss(logits, [0])

    def test_gradients(self, rng):
        logits = Tensor(rng.normal(size=(5, 4)), requires_grad=True)
        labels = rng.integers(0, 4, size=5)
        err = gradient_check(lambda: cluster_loss(logits, labels), [logits])
        assert err < 1e-5


class TestCosinePairLoss:
    def test_matches_scalar_oracle(self, rng):
        for _ in range(30):
            seeds, ctxs, negs, j = random_instance(rng)
            margin = float(rng.uniform(0.0, 0.9))
            got = float(cosine_pair_loss(Tensor(seeds), Tensor(ctxs),
                                         Tensor(negs), j, margin).data)
            want = oracle_cosine(seeds.tolist(), ctxs.tolist(),
                                 negs.tolist(), j, margin)
            assert abs(got - want) < 1e-10

    def test_aligned_pairs_no_margin_violation_is_zero(self):
        seeds = np.array([[1.0, 0.0], [0.0, 2.0]])
        negs = np.array([[-1.0, 0.0], [0.0, -3.0]])
        got = float(cosine_pair_loss(Tensor(seeds), Tensor(seeds),
                                     Tensor(negs), 1, 0.5).data)
        assert got == pytest.approx(0.0, abs=1e-9)

    def test_margin_validated(self, rng):
        seeds, ctxs, negs, j = random_instance(rng, p=2, j=1, d=3)
        with pytest.raises(ValueError):
            cosine_pair_loss(Tensor(seeds), Tensor(ctxs), Tensor(negs), j,
                             margin=1.0)

    def test_gradients(self, rng):
        seeds, ctxs, negs, j = random_instance(rng, p=3, j=2, d=3)
        ts = Tensor(seeds, requires_grad=True)
        tc = Tensor(ctxs, requires_grad=True)
        tn = Tensor(negs, requires_grad=True)
        err = gradient_check(
            lambda: cosine_pair_loss(ts, tc, tn, j, 0.4), [ts, tc, tn])
        assert err < 1e-4


class TestGramRegressionLoss:
    def test_matches_scalar_oracle(self, rng):
        for _ in range(30):
            b = int(rng.integers(1, 7))
            d = int(rng.integers(2, 5))
            reps = rng.normal(size=(b, d))
            target = rng.normal(size=(b, b))
            target = (target + target.T) / 2
            got = float(gram_regression_loss(Tensor(reps), target).data)
            want = oracle_gram(reps.tolist(), target.tolist())
            assert abs(got - want) < 1e-9

    def test_exact_gram_is_zero(self, rng):
        reps = rng.normal(size=(4, 3))
        got = float(gram_regression_loss(Tensor(reps), reps @ reps.T).data)
        assert got == pytest.approx(0.0, abs=1e-18)

    def test_shape_validated(self, rng):
        with pytest.raises(ValueError):
            gram_regression_loss(Tensor(rng.normal(size=(3, 2))),
                                 np.zeros((2, 2)))

    def test_gradients(self, rng):
        reps = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        target = rng.normal(size=(4, 4))
        err = gradient_check(lambda: gram_regression_loss(reps, target),
                             [reps])
        assert err < 1e-4
