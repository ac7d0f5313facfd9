"""Parameter containers and dense layers on top of :mod:`grl_traffic.tensor`."""

from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from . import tensor as T
from .tensor import Tensor


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Module:
    """Walks attributes to collect parameters under dotted names."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, value in vars(self).items():
            if key.startswith("_"):
                continue
            name = f"{prefix}{key}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{key[:-1] if key.endswith('s') else key}{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)}")
        for k, p in own.items():
            if state[k].shape != p.shape:
                raise ValueError(f"shape mismatch for {k}: {state[k].shape} vs {p.shape}")
            p.data = np.array(state[k], dtype=np.float64)

    def copy_from(self, other: "Module", tau: float = 1.0) -> None:
        """Polyak update ``self <- tau * other + (1 - tau) * self``."""
        for (_, mine), (_, theirs) in zip(self.named_parameters(), other.named_parameters()):
            if tau >= 1.0:
                mine.data = theirs.data.copy()
            elif tau > 0.0:
                mine.data = tau * theirs.data + (1.0 - tau) * mine.data


class Dense(Module):
    def __init__(self, rng: np.random.Generator, fan_in: int, fan_out: int, bias: bool = True):
        self.weight = T.parameter(glorot_uniform(rng, fan_in, fan_out))
        self.bias = T.parameter(np.zeros(fan_out)) if bias else None

    def __call__(self, x) -> Tensor:
        y = T.matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y


class MLP(Module):
    """Dense stack with ReLU between layers and a linear output."""

    def __init__(self, rng: np.random.Generator, sizes: Sequence[int]):
        self.layers = [Dense(rng, a, b) for a, b in zip(sizes[:-1], sizes[1:])]

    def __call__(self, x) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = T.relu(x)
        return x
