from __future__ import annotations

from typing import Iterable

import numpy as np

from .tensor import Tensor


def clip_grad_norm(params: Iterable[Tensor], max_norm: float) -> float:
    """Rescale gradients in place so their global L2 norm is at most ``max_norm``."""
    params = [p for p in params if p.grad is not None]
    total = float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad = p.grad * scale
    return total


class Optimizer:
    kind = "base"

    def __init__(self, params: Iterable[Tensor], learning_rate: float):
        if learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        self.params = list(params)
        self.learning_rate = learning_rate
        self.step_count = 0

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def _check_grads(self) -> None:
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise ValueError(f"parameter {p.name or i!r} has no gradient")

    def step(self) -> None:
        self._check_grads()
        self.step_count += 1
        self._update()

    def _update(self) -> None:
        raise NotImplementedError

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {}


class SGD(Optimizer):
    kind = "sgd"

    def _update(self) -> None:
        lr = self.learning_rate
        for p in self.params:
            p.data = p.data - lr * p.grad


class Adam(Optimizer):
    kind = "adam"

    def __init__(self, params, learning_rate: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        super().__init__(params, learning_rate)
        self.beta1, self.beta2, self.epsilon = beta1, beta2, epsilon
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def _update(self) -> None:
        b1, b2, t = self.beta1, self.beta2, self.step_count
        c1 = 1.0 - b1 ** t
        c2 = 1.0 - b2 ** t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data = p.data - self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.epsilon)


def make_optimizer(kind: str, params, learning_rate: float) -> Optimizer:
    if kind == "sgd":
        return SGD(params, learning_rate)
    if kind == "adam":
        return Adam(params, learning_rate)
    raise ValueError(f"unknown optimizer kind {kind!r}")
