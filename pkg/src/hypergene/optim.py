"""Adam and a reduce-on-plateau learning-rate schedule."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Adam:
    """Adam with bias correction over a name -> Tensor parameter dict.

    Per-parameter first/second moment buffers are created lazily on the
    first step.  Parameters whose grad is None are skipped that step.
    """

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = {}
        self._v = {}
        self._t = 0

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        self._t += 1
        b1, b2 = self.beta1, self.beta2
        for name, p in self.params.items():
            if p.grad is None:
                continue
            if name not in self._m:
                self._m[name] = np.zeros_like(p.data)
                self._v[name] = np.zeros_like(p.data)
            m, v = self._m[name], self._v[name]
            m *= b1
            m += (1 - b1) * p.grad
            v *= b2
            v += (1 - b2) * (p.grad ** 2)
            m_hat = m / (1 - b1 ** self._t)
            v_hat = v / (1 - b2 ** self._t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class ReduceOnPlateau:
    """Halve the learning rate after `patience` epochs without improvement.

    An epoch improves when its loss beats the best seen so far by a relative
    margin of `rel_threshold`.  The first epoch establishes the baseline and
    does not count as an improvement, so a constant loss over `patience`
    epochs triggers exactly one halving.  The rate never drops below
    `min_lr`, and the wait counter resets after each reduction.
    """

    def __init__(self, lr: float, factor: float = 0.5, patience: int = 10,
                 rel_threshold: float = 1e-4, min_lr: float = 1e-6):
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.rel_threshold = rel_threshold
        self.min_lr = min_lr
        self.best = None
        self.wait = 0

    def step(self, loss: float) -> float:
        """Record one epoch's loss; returns the (possibly reduced) rate."""
        if self.best is not None and loss < self.best * (1.0 - self.rel_threshold):
            self.best = loss
            self.wait = 0
            return self.lr
        if self.best is None:
            self.best = loss
        self.wait += 1
        if self.wait >= self.patience:
            self.lr = max(self.lr * self.factor, self.min_lr)
            self.wait = 0
        return self.lr


def schedule_from_history(history, lr: float, **kwargs) -> float:
    """Fold a loss history through ReduceOnPlateau; returns the final rate."""
    if len(history) == 0:
        raise ValueError("history must be nonempty")
    sched = ReduceOnPlateau(lr, **kwargs)
    for loss in history:
        sched.step(float(loss))
    return sched.lr
