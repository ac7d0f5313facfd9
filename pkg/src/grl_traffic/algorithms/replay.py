"""Uniform and prioritized (sum-tree) experience replay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..graph import GraphObservation


@dataclass
class Transition:
    obs: GraphObservation
    actions: np.ndarray
    reward: float
    next_obs: GraphObservation
    done: bool
    mask: np.ndarray


class ReplayBuffer:
    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.storage: list[Transition] = []
        self.next_idx = 0

    def __len__(self) -> int:
        return len(self.storage)

    def add(self, t: Transition) -> int:
        idx = self.next_idx
        if idx >= len(self.storage):
            self.storage.append(t)
        else:
            self.storage[idx] = t
        self.next_idx = (idx + 1) % self.capacity
        return idx

    def sample(self, batch_size: int, rng: np.random.Generator) -> tuple[list[Transition], np.ndarray]:
        if batch_size > len(self):
            raise ValueError(f"batch_size {batch_size} exceeds buffer size {len(self)}")
        idx = rng.integers(0, len(self), size=batch_size)
        return [self.storage[i] for i in idx], idx


class SumTree:
    """Binary tree over a power-of-two leaf array; internal nodes hold subtree sums."""

    def __init__(self, capacity: int):
        size = 1
        while size < capacity:
            size *= 2
        self.size = size
        self.nodes = np.zeros(2 * size)

    @property
    def total(self) -> float:
        return float(self.nodes[1])

    def __getitem__(self, i: int) -> float:
        return float(self.nodes[self.size + i])

    def update(self, i: int, value: float) -> None:
        j = self.size + i
        self.nodes[j] = value
        j //= 2
        while j >= 1:
            self.nodes[j] = self.nodes[2 * j] + self.nodes[2 * j + 1]
            j //= 2

    def find(self, mass: float) -> int:
        """Leaf index whose prefix-sum interval contains ``mass``."""
        j = 1
        while j < self.size:
            left = self.nodes[2 * j]
            if mass < left:
                j = 2 * j
            else:
                mass -= left
                j = 2 * j + 1
        return j - self.size


class PrioritizedReplayBuffer(ReplayBuffer):
    """Sampling probability proportional to ``priority ** alpha``.

    New transitions enter at the running max priority.
    """

    def __init__(self, capacity: int, alpha: float = 0.6, eps: float = 1e-6):
        super().__init__(capacity)
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.alpha = alpha
        self.eps = eps
        self.tree = SumTree(capacity)
        self.max_priority = 1.0

    def add(self, t: Transition) -> int:
        idx = super().add(t)
        self.tree.update(idx, self.max_priority ** self.alpha)
        return idx

    def priority(self, i: int) -> float:
        return self.tree[i] ** (1.0 / self.alpha) if self.alpha > 0 else 1.0

    def update_priorities(self, indices, priorities) -> None:
        for i, p in zip(indices, priorities):
            p = float(p) + self.eps
            if not p > 0:
                raise ValueError("priorities must be positive")
            self.tree.update(int(i), p ** self.alpha)
            self.max_priority = max(self.max_priority, p)

    def sample(self, batch_size: int, rng: np.random.Generator, beta: float = 0.4
               ) -> tuple[list[Transition], np.ndarray, np.ndarray]:
        return per_sample(self, batch_size, beta, rng)


def per_sample(buffer: PrioritizedReplayBuffer, batch_size: int, beta: float,
               rng: np.random.Generator) -> tuple[list[Transition], np.ndarray, np.ndarray]:
    """Stratified proportional sampling.

    Returns the batch, importance weights ``(N * P(i)) ** -beta`` scaled by
    their batch maximum, and the sampled indices.
    """
    n = len(buffer)
    if n == 0 or batch_size > n:
        raise ValueError(f"batch_size {batch_size} exceeds buffer size {n}")
    total = buffer.tree.total
    seg = total / batch_size
    masses = (np.arange(batch_size) + rng.random(batch_size)) * seg
    idx = np.array([min(buffer.tree.find(m), n - 1) for m in masses], dtype=np.int64)
    probs = np.array([buffer.tree[i] for i in idx]) / total
    weights = (n * probs) ** (-beta)
    weights = weights / weights.max()
    return [buffer.storage[i] for i in idx], idx, weights
