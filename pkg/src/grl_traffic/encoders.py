"""GCN and flat (per-slot) node encoders.

Both take node features ``(..., S, F)``, a propagation matrix ``(..., S, S)``
and an occupancy mask ``(..., S)``.  The GCN propagates with the symmetric
normalized adjacency; the flat encoder uses ``diag(mask)`` instead, which
makes it the same stack with message passing removed.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import tensor as T
from .graph import GraphObservation, normalized_adjacency
from .nn import Module, glorot_uniform
from .tensor import Tensor

GCN, FLAT = "gcn", "flat"


class GcnLayer(Module):
    """``sigma(P Z W)``; the offset is fixed at zero."""

    def __init__(self, rng: np.random.Generator, fan_in: int, fan_out: int, activation: str = "relu"):
        if activation not in ("relu", "none"):
            raise ValueError(f"unknown activation {activation!r}")
        self.weight = T.parameter(glorot_uniform(rng, fan_in, fan_out))
        self.activation = activation

    def __call__(self, prop, z) -> Tensor:
        out = T.matmul(prop, T.matmul(z, self.weight))
        return T.relu(out) if self.activation == "relu" else out


def gcn_forward(node_features, adjacency: np.ndarray, layers: Sequence[GcnLayer],
                mask: np.ndarray | None = None) -> Tensor:
    """Stacked graph convolutions on a symmetric adjacency with unit diagonal on occupied slots."""
    adjacency = np.asarray(adjacency)
    if not np.array_equal(adjacency, np.swapaxes(adjacency, -1, -2)):
        raise ValueError("adjacency must be symmetric")
    prop = normalized_adjacency(adjacency)
    z = T.as_tensor(node_features)
    if mask is not None:
        z = z * np.asarray(mask)[..., None]
    for layer in layers:
        z = layer(prop, z)
    return z


def flat_forward(node_features, mask: np.ndarray, layers: Sequence[GcnLayer]) -> Tensor:
    """Per-slot dense stack; adjacency is ignored and unoccupied slots stay zero."""
    m = np.asarray(mask, dtype=np.float64)
    z = T.as_tensor(node_features) * m[..., None]
    for layer in layers:
        z = T.matmul(z, layer.weight)
        if layer.activation == "relu":
            z = T.relu(z)
    return z


def pool_global(z, mask: np.ndarray) -> Tensor:
    """Mean over occupied slots; zero vector when none is occupied."""
    m = np.asarray(mask, dtype=np.float64)
    count = np.maximum(m.sum(axis=-1, keepdims=True), 1.0)
    return T.tsum(T.as_tensor(z) * m[..., None], axis=-2) / count


class Encoder(Module):
    """Encoder stack with ReLU between layers and a linear last layer."""

    def __init__(self, rng: np.random.Generator, kind: str, in_features: int,
                 widths: Sequence[int] = (32, 32)):
        if kind not in (GCN, FLAT):
            raise ValueError(f"unknown encoder kind {kind!r}")
        if not widths:
            raise ValueError("encoder needs at least one layer")
        self.kind = kind
        sizes = [in_features, *widths]
        self.layers = [GcnLayer(rng, a, b, "relu" if i < len(widths) - 1 else "none")
                       for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))]
        self.out_features = widths[-1]

    def propagation(self, adjacency: np.ndarray, mask: np.ndarray) -> np.ndarray:
        if self.kind == GCN:
            return normalized_adjacency(adjacency)
        m = np.asarray(mask, dtype=np.float64)
        return m[..., :, None] * np.eye(m.shape[-1])

    def __call__(self, node_features, prop: np.ndarray, mask: np.ndarray) -> Tensor:
        z = T.as_tensor(node_features) * np.asarray(mask)[..., None]
        if self.kind == FLAT:
            for layer in self.layers:
                z = T.matmul(z, layer.weight)
                if layer.activation == "relu":
                    z = T.relu(z)
            return z
        for layer in self.layers:
            z = layer(prop, z)
        return z

    def encode(self, obs: GraphObservation) -> Tensor:
        mask = obs.mask
        return self(obs.node_features, self.propagation(obs.adjacency, mask), mask)


def stack_observations(observations: Sequence[GraphObservation]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batch features, raw adjacency and masks along a new leading axis."""
    feats = np.stack([o.node_features for o in observations])
    adj = np.stack([o.adjacency for o in observations])
    mask = np.stack([o.mask for o in observations])
    return feats, adj, mask
