"""SGD (with momentum) and Adam over a model's parameter registry."""

from __future__ import annotations

import numpy as np

from uqkit.tensor import Tensor


class Optimizer:
    def __init__(self, params: dict[str, Tensor]):
        self.params = dict(params)
        self.t = 0

    def step(self) -> None:
        if all(p.grad is None for p in self.params.values()):
            raise RuntimeError("optimizer step before any backward pass")
        self.t += 1
        for name, p in self.params.items():
            if p.grad is None:
                continue
            self._update(name, p)
            p.zero_grad()

    def _update(self, name: str, p: Tensor) -> None:
        raise NotImplementedError


class SGD(Optimizer):
    def __init__(self, params, lr: float, momentum: float = 0.0):
        super().__init__(params)
        self.lr = lr
        self.momentum = momentum
        self.velocity = {n: np.zeros_like(p.data) for n, p in self.params.items()}

    def _update(self, name, p):
        if self.momentum:
            v = self.momentum * self.velocity[name] + p.grad
            self.velocity[name] = v
        else:
            v = p.grad
        p.data = p.data - self.lr * v


class Adam(Optimizer):
    """Adam with bias-corrected first and second moments."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self.v = {n: np.zeros_like(p.data) for n, p in self.params.items()}

    def _update(self, name, p):
        g = p.grad
        self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
        self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
        m_hat = self.m[name] / (1.0 - self.beta1 ** self.t)
        v_hat = self.v[name] / (1.0 - self.beta2 ** self.t)
        p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(kind: str, params, lr: float, **kwargs) -> Optimizer:
    if kind == "adam":
        return Adam(params, lr=lr, **kwargs)
    if kind == "sgd":
        return SGD(params, lr=lr, **kwargs)
    raise ValueError(f"unknown optimizer {kind!r}; valid: adam, sgd")
