"""Autodiff substrate: forward values against numpy, gradients against
central finite differences, bookkeeping and checkpoint behavior."""

import numpy as np
import pytest
import scipy.sparse as sp

from hypergene import tensor as T
from hypergene.tensor import (Tensor, backward, clone_params, gradient_check,
                              load_params, no_grad, save_params)


def fd_grad(f, x, step=1e-6):
    """Central finite differences of a scalar function of one array."""
    g = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        hi = f()
        x[idx] = orig - step
        lo = f()
        x[idx] = orig
        g[idx] = (hi - lo) / (2 * step)
        it.iternext()
    return g


def check_op(build, *shapes, seed=0, tol=1e-6):
    """Gradient of sum(op(...)) for every input against finite differences."""
    rng = np.random.default_rng(seed)
    params = [Tensor(rng.normal(size=s), requires_grad=True) for s in shapes]

    def forward():
        with no_grad():
            return float(T.tsum(build(*params)).data)

    loss = T.tsum(build(*params))
    backward(loss)
    for p in params:
        num = fd_grad(forward, p.data)
        assert p.grad is not None
        np.testing.assert_allclose(p.grad, num, rtol=tol, atol=tol)


class TestForward:
    def test_add_mul_div_match_numpy(self, rng):
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(3, 4)) + 2.0
        np.testing.assert_allclose(T.add(Tensor(a), Tensor(b)).data, a + b)
        np.testing.assert_allclose(T.mul(Tensor(a), Tensor(b)).data, a * b)
        np.testing.assert_allclose(T.div(Tensor(a), Tensor(b)).data, a / b)

    def test_matmul_matches_numpy(self, rng):
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
        np.testing.assert_allclose(T.matmul(Tensor(a), Tensor(b)).data, a @ b)

    def test_activations_match_numpy(self, rng):
        x = rng.normal(size=(5, 3))
        np.testing.assert_allclose(T.relu(Tensor(x)).data, np.maximum(x, 0))
        np.testing.assert_allclose(T.sigmoid(Tensor(x)).data,
                                   1 / (1 + np.exp(-x)))
        np.testing.assert_allclose(T.logsigmoid(Tensor(x)).data,
                                   np.log(1 / (1 + np.exp(-x))), atol=1e-12)

    def test_log_softmax_rows_normalize(self, rng):
        x = rng.normal(size=(4, 6))
        out = T.log_softmax(Tensor(x), axis=1).data
        np.testing.assert_allclose(np.exp(out).sum(axis=1), np.ones(4))
        # invariant under row shifts
        out2 = T.log_softmax(Tensor(x + 100.0), axis=1).data
        np.testing.assert_allclose(out, out2, atol=1e-9)

    def test_reductions_match_numpy(self, rng):
        x = rng.normal(size=(3, 5))
        np.testing.assert_allclose(T.tsum(Tensor(x)).data, x.sum())
        np.testing.assert_allclose(T.tsum(Tensor(x), axis=0).data, x.sum(0))
        np.testing.assert_allclose(T.tmean(Tensor(x)).data, x.mean())
        # row_mean returns the average row
        np.testing.assert_allclose(T.row_mean(Tensor(x)).data, x.mean(0))

    def test_gather_concat_transpose(self, rng):
        x = rng.normal(size=(6, 2))
        idx = np.array([3, 0, 3, 5])
        np.testing.assert_allclose(T.gather_rows(Tensor(x), idx).data, x[idx])
        y = rng.normal(size=(4, 2))
        np.testing.assert_allclose(
            T.concat([Tensor(x), Tensor(y)], axis=0).data,
            np.concatenate([x, y], axis=0))
        np.testing.assert_allclose(T.transpose(Tensor(x)).data, x.T)

    def test_const_matmul_matches_dense(self, rng):
        c = sp.random(5, 7, density=0.5, random_state=1, format="csr")
        h = rng.normal(size=(7, 3))
        np.testing.assert_allclose(T.const_matmul(c, Tensor(h)).data,
                                   c.toarray() @ h)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_output_raises(self):
        with pytest.raises(FloatingPointError):
            T.log(Tensor(np.array([0.0])))
        with pytest.raises(FloatingPointError):
            T.div(Tensor(np.ones(2)), Tensor(np.zeros(2)))


class TestBackward:
    def test_elementwise_ops(self):
        check_op(lambda a, b: T.mul(T.add(a, b), a), (3, 4), (3, 4))
        check_op(lambda a, b: T.div(a, T.add(T.mul(b, b), 1.0)), (2, 3), (2, 3))

    def test_broadcast_add_and_mul(self):
        check_op(lambda a, b: T.add(a, b), (3, 4), (4,))
        check_op(lambda a, b: T.mul(a, b), (3, 4), (1, 4))

    def test_matmul_all_shapes(self):
        check_op(lambda a, b: T.matmul(a, b), (3, 4), (4, 2))
        check_op(lambda a, b: T.matmul(a, b), (4,), (4, 2))
        check_op(lambda a, b: T.matmul(a, b), (3, 4), (4,))
        check_op(lambda a, b: T.matmul(a, b), (4,), (4,))

    def test_activations(self):
        check_op(lambda a: T.sigmoid(a), (4, 3))
        check_op(lambda a: T.logsigmoid(a), (4, 3))
        check_op(lambda a: T.log(T.add(T.mul(a, a), 1.0)), (4, 3))
        check_op(lambda a: T.sqrt(T.add(T.mul(a, a), 1.0)), (3,))
        check_op(lambda a: T.mul(T.log_softmax(a, axis=1), a), (4, 5))

    def test_relu_away_from_kink(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(4, 3))
        x[np.abs(x) < 0.1] = 0.5
        t = Tensor(x, requires_grad=True)
        backward(T.tsum(T.relu(t)))
        np.testing.assert_allclose(t.grad, (x > 0).astype(float))

    def test_structural_ops(self):
        idx = np.array([0, 2, 2, 1])
        check_op(lambda a: T.mul(T.gather_rows(a, idx),
                                 T.gather_rows(a, idx)), (4, 3))
        check_op(lambda a, b: T.mul(T.concat([a, b], axis=0), 2.0),
                 (2, 3), (4, 3))
        check_op(lambda a: T.matmul(T.transpose(a), a), (3, 4))
        check_op(lambda a: T.mul(T.row_mean(a), T.row_mean(a)), (4, 6))

    def test_const_matmul(self):
        c = sp.random(6, 5, density=0.6, random_state=7, format="csr")
        check_op(lambda h: T.mul(T.const_matmul(c, h), 3.0), (5, 2))

    def test_reused_tensor_accumulates(self):
        a = Tensor(np.array([2.0, 3.0]), requires_grad=True)
        loss = T.tsum(T.add(T.mul(a, a), a))  # d/da (a^2 + a) = 2a + 1
        backward(loss)
        np.testing.assert_allclose(a.grad, 2 * a.data + 1)

    def test_grad_accumulates_across_backwards(self):
        a = Tensor(np.ones(3), requires_grad=True)
        backward(T.tsum(a))
        backward(T.tsum(a))
        np.testing.assert_allclose(a.grad, 2 * np.ones(3))

    def test_zero_grad(self):
        a = Tensor(np.ones(3), requires_grad=True)
        backward(T.tsum(a))
        a.zero_grad()
        assert a.grad is None

    def test_no_grad_records_nothing(self):
        a = Tensor(np.ones(3), requires_grad=True)
        with no_grad():
            out = T.mul(a, 2.0)
        assert not out.requires_grad
        backward(T.tsum(out))
        assert a.grad is None

    def test_backward_requires_scalar(self):
        a = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(ValueError):
            backward(T.mul(a, 1.0))


class TestGradientCheck:
    def test_passes_on_smooth_function(self, rng):
        w = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
        x = rng.normal(size=(5, 3))

        def f():
            h = T.matmul(Tensor(x), w)
            return T.tsum(T.mul(T.sigmoid(h), h))

        max_err = gradient_check(f, [w])
        assert max_err < 1e-6

    def test_flags_wrong_gradient(self):
        w = Tensor(np.ones(3), requires_grad=True)
        assert gradient_check(lambda: T.tsum(T.mul(w, w)), [w]) < 1e-6
        # a function that changes between passes yields mismatched grads
        w2 = Tensor(np.ones(3), requires_grad=True)
        calls = {"n": 0}

        def g():
            calls["n"] += 1
            scale = 1.0 if calls["n"] == 1 else 2.0
            return T.tsum(T.mul(T.mul(w2, scale), w2))

        assert gradient_check(g, [w2]) > 1e-3


class TestCheckpoints:
    def test_roundtrip(self, tmp_path, rng):
        params = {"enc.W": Tensor(rng.normal(size=(3, 2)), requires_grad=True),
                  "enc.b": Tensor(np.zeros(2), requires_grad=True)}
        path = tmp_path / "ck.npz"
        save_params(path, params)
        loaded = load_params(path)
        assert set(loaded) == set(params)
        for k in params:
            np.testing.assert_array_equal(loaded[k].data, params[k].data)
            assert loaded[k].requires_grad

    def test_version_mismatch_rejected(self, tmp_path):
        np.savez(tmp_path / "bad.npz", __format_version__=np.int64(999),
                 w=np.ones(2))
        with pytest.raises(ValueError, match="format"):
            load_params(tmp_path / "bad.npz")

    def test_clone_is_deep(self):
        p = {"w": Tensor(np.ones(2), requires_grad=True)}
        c = clone_params(p)
        c["w"].data[0] = 5.0
        assert p["w"].data[0] == 1.0
