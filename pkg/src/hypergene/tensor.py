"""Reverse-mode automatic differentiation over dense float64 buffers.

A global tape records every differentiable op in execution order.  backward()
walks the records in reverse, accumulating gradients into the ``grad`` buffer
of any tensor that requires them, then clears the tape.  One training step is
one forward pass plus one backward pass; the tape is not reusable.

Ops are deliberately limited to what the models in this package need.  All
values are float64.  A non-finite value anywhere in an op output raises
FloatingPointError rather than propagating NaNs into training.
"""

from __future__ import annotations

import contextlib

import numpy as np
import scipy.sparse as sp


class Tensor:
    """A dense float64 array plus an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; all routed through the module-level ops below.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __truediv__(self, other):
        return div(self, other)


class Tape:
    """Ordered record of differentiable ops for one forward pass."""

    def __init__(self):
        self._records = []

    def record(self, out: Tensor, inputs, backward_fn):
        # backward_fn(out_grad) -> tuple of grads aligned with `inputs`
        # (None for inputs that need no gradient).
        self._records.append((out, inputs, backward_fn))

    def clear(self):
        self._records.clear()

    def __len__(self):
        return len(self._records)


_TAPE = Tape()
_GRAD_ENABLED = True


def active_tape() -> Tape:
    return _TAPE


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (evaluation forwards)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values produced by op '{op}'")
    return arr


def _needs_grad(*tensors: Tensor) -> bool:
    return _GRAD_ENABLED and any(t.requires_grad for t in tensors)


def _make_out(arr: np.ndarray, op: str, track: bool) -> Tensor:
    out = Tensor(_check_finite(arr, op))
    out.requires_grad = track
    return out


def _accumulate(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum gradient g down to `shape`, undoing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# ops


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    track = _needs_grad(a, b)
    out = _make_out(a.data + b.data, "add", track)
    if track:
        def backward(g):
            return (g if a.requires_grad else None,
                    g if b.requires_grad else None)
        _TAPE.record(out, (a, b), backward)
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    track = _needs_grad(a, b)
    out = _make_out(a.data * b.data, "mul", track)
    if track:
        def backward(g):
            return (g * b.data if a.requires_grad else None,
                    g * a.data if b.requires_grad else None)
        _TAPE.record(out, (a, b), backward)
    return out


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    track = _needs_grad(a, b)
    out = _make_out(a.data / b.data, "div", track)
    if track:
        def backward(g):
            ga = g / b.data if a.requires_grad else None
            gb = -g * a.data / (b.data ** 2) if b.requires_grad else None
            return (ga, gb)
        _TAPE.record(out, (a, b), backward)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    track = _needs_grad(a, b)
    out = _make_out(a.data @ b.data, "matmul", track)
    if track:
        def backward(g):
            ga = gb = None
            if a.requires_grad:
                if b.data.ndim == 2:
                    ga = g @ b.data.T
                else:
                    ga = np.outer(g, b.data) if a.data.ndim == 2 else g * b.data
            if b.requires_grad:
                if a.data.ndim == 2:
                    gb = a.data.T @ g
                else:
                    gb = np.outer(a.data, g) if b.data.ndim == 2 else g * a.data
            return (ga, gb)
        _TAPE.record(out, (a, b), backward)
    return out


def const_matmul(c, t: Tensor) -> Tensor:
    """out = c @ t where c is a constant ndarray or scipy sparse matrix.

    The aggregation matrices of the graph encoders are fixed per batch, so
    they bypass the tape; only t receives a gradient (c.T @ g).
    """
    track = _needs_grad(t)
    out = _make_out(np.asarray(c @ t.data), "const_matmul", track)
    if track:
        ct = c.T if not sp.issparse(c) else c.T.tocsr()

        def backward(g):
            return (np.asarray(ct @ g),)
        _TAPE.record(out, (t,), backward)
    return out


def relu(t: Tensor) -> Tensor:
    track = _needs_grad(t)
    out = _make_out(np.maximum(t.data, 0.0), "relu", track)
    if track:
        mask = t.data > 0

        def backward(g):
            return (g * mask,)
        _TAPE.record(out, (t,), backward)
    return out


def sigmoid(t: Tensor) -> Tensor:
    track = _needs_grad(t)
    # piecewise form avoids overflow in exp for large |x|
    x = t.data
    s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = _make_out(s, "sigmoid", track)
    if track:
        def backward(g):
            return (g * s * (1.0 - s),)
        _TAPE.record(out, (t,), backward)
    return out


def logsigmoid(t: Tensor) -> Tensor:
    """log(sigmoid(x)) computed as -softplus(-x); stable for large |x|."""
    track = _needs_grad(t)
    x = t.data
    val = np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))),
                   x - np.log1p(np.exp(-np.abs(x))))
    out = _make_out(val, "logsigmoid", track)
    if track:
        sig = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                       np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

        def backward(g):
            return (g * (1.0 - sig),)
        _TAPE.record(out, (t,), backward)
    return out


def log(t: Tensor) -> Tensor:
    track = _needs_grad(t)
    out = _make_out(np.log(t.data), "log", track)
    if track:
        def backward(g):
            return (g / t.data,)
        _TAPE.record(out, (t,), backward)
    return out


def sqrt(t: Tensor) -> Tensor:
    track = _needs_grad(t)
    root = np.sqrt(t.data)
    out = _make_out(root, "sqrt", track)
    if track:
        def backward(g):
            return (g * 0.5 / root,)
        _TAPE.record(out, (t,), backward)
    return out


def log_softmax(t: Tensor, axis: int = -1) -> Tensor:
    track = _needs_grad(t)
    shifted = t.data - np.max(t.data, axis=axis, keepdims=True)
    logz = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    val = shifted - logz
    out = _make_out(val, "log_softmax", track)
    if track:
        softmax = np.exp(val)

        def backward(g):
            return (g - softmax * np.sum(g, axis=axis, keepdims=True),)
        _TAPE.record(out, (t,), backward)
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    track = _needs_grad(*tensors)
    out = _make_out(np.concatenate([t.data for t in tensors], axis=axis),
                    "concat", track)
    if track:
        sizes = [t.data.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)

        def backward(g):
            grads = []
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    sl = [slice(None)] * g.ndim
                    sl[axis] = slice(lo, hi)
                    grads.append(g[tuple(sl)])
                else:
                    grads.append(None)
            return tuple(grads)
        _TAPE.record(out, tuple(tensors), backward)
    return out


def gather_rows(t: Tensor, idx) -> Tensor:
    """Select rows of a 2-D tensor; duplicate indices sum their gradients."""
    idx = np.asarray(idx, dtype=np.intp)
    track = _needs_grad(t)
    out = _make_out(t.data[idx], "gather_rows", track)
    if track:
        def backward(g):
            full = np.zeros_like(t.data)
            np.add.at(full, idx, g)
            return (full,)
        _TAPE.record(out, (t,), backward)
    return out


def row_mean(t: Tensor) -> Tensor:
    """Mean over axis 0 of a 2-D tensor; returns a 1-D tensor."""
    track = _needs_grad(t)
    n = t.data.shape[0]
    out = _make_out(t.data.mean(axis=0), "row_mean", track)
    if track:
        def backward(g):
            return (np.broadcast_to(g / n, t.data.shape).copy(),)
        _TAPE.record(out, (t,), backward)
    return out


def tsum(t: Tensor, axis=None) -> Tensor:
    track = _needs_grad(t)
    out = _make_out(np.sum(t.data, axis=axis), "sum", track)
    if track:
        def backward(g):
            if axis is None:
                return (np.broadcast_to(g, t.data.shape).copy(),)
            ge = np.expand_dims(g, axis)
            return (np.broadcast_to(ge, t.data.shape).copy(),)
        _TAPE.record(out, (t,), backward)
    return out


def tmean(t: Tensor, axis=None) -> Tensor:
    count = t.data.size if axis is None else t.data.shape[axis]
    return mul(tsum(t, axis=axis), 1.0 / count)


def transpose(t: Tensor) -> Tensor:
    track = _needs_grad(t)
    out = _make_out(t.data.T, "transpose", track)
    if track:
        def backward(g):
            return (g.T,)
        _TAPE.record(out, (t,), backward)
    return out


def dropout(t: Tensor, p: float, rng: np.random.Generator,
            training: bool = True) -> Tensor:
    """Inverted dropout: scales kept activations by 1/(1-p) during training."""
    if not training or p <= 0.0:
        return t
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    keep = (rng.random(t.data.shape) >= p) / (1.0 - p)
    track = _needs_grad(t)
    out = _make_out(t.data * keep, "dropout", track)
    if track:
        def backward(g):
            return (g * keep,)
        _TAPE.record(out, (t,), backward)
    return out


# ---------------------------------------------------------------------------
# backward and gradient checking


def backward(loss: Tensor):
    """Populate grad buffers by reverse traversal from a scalar loss.

    The tape is cleared afterwards whether or not traversal succeeds.
    """
    if loss.data.size != 1:
        _TAPE.clear()
        raise ValueError("backward requires a scalar loss")
    try:
        produced = {id(out) for out, _, _ in _TAPE._records}
        grads = {id(loss): np.ones_like(loss.data)}
        for out, inputs, backward_fn in reversed(_TAPE._records):
            g_out = grads.pop(id(out), None)
            if g_out is None:
                continue
            for t, g in zip(inputs, backward_fn(g_out)):
                if g is None or not t.requires_grad:
                    continue
                g = _unbroadcast(np.asarray(g, dtype=np.float64), t.data.shape)
                if id(t) in grads:
                    grads[id(t)] += g
                elif id(t) in produced:
                    # intermediate: merge branches in the dict so its own
                    # backward fires once with the full gradient
                    grads[id(t)] = g.copy()
                else:
                    _accumulate(t, g)
    finally:
        _TAPE.clear()


CHECKPOINT_FORMAT = 1


def save_params(path, params: dict[str, Tensor]):
    """Write named parameter tensors to a versioned .npz checkpoint."""
    arrays = {name: p.data for name, p in params.items()}
    if "__format_version__" in arrays:
        raise ValueError("'__format_version__' is a reserved parameter name")
    arrays["__format_version__"] = np.array(CHECKPOINT_FORMAT)
    np.savez(path, **arrays)


def load_params(path, requires_grad: bool = True) -> dict[str, Tensor]:
    """Read a checkpoint written by save_params; validates the version."""
    with np.load(path) as blob:
        version = int(blob["__format_version__"])
        if version != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {version}")
        return {name: Tensor(blob[name], requires_grad=requires_grad)
                for name in blob.files if name != "__format_version__"}


def clone_params(params: dict[str, Tensor]) -> dict[str, Tensor]:
    """Deep-copy a parameter dict (data only; grads dropped)."""
    out = {}
    for name, p in params.items():
        t = Tensor(p.data.copy(), requires_grad=p.requires_grad)
        out[name] = t
    return out


def gradient_check(f, params, step: float = 1e-5) -> float:
    """Compare analytic gradients of f() against central finite differences.

    f is a zero-argument callable returning a scalar loss Tensor built from
    `params` (a list of Tensors with requires_grad=True).  Returns the
    maximum relative error over every coordinate of every parameter.
    """
    for p in params:
        p.zero_grad()
    loss = f()
    backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]

    max_err = 0.0
    with no_grad():
        for p, a in zip(params, analytic):
            flat = p.data.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                hi = float(f().data)
                flat[i] = orig - step
                lo = float(f().data)
                flat[i] = orig
                numeric = (hi - lo) / (2.0 * step)
                ai = a.reshape(-1)[i]
                err = abs(ai - numeric) / max(abs(ai), abs(numeric), 1.0)
                max_err = max(max_err, err)
    for p in params:
        p.zero_grad()
    return max_err
