"""Policy and value networks: an encoder followed by per-slot or pooled heads."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .. import tensor as T
from ..encoders import Encoder, pool_global
from ..nn import MLP, Module
from ..tensor import Tensor
from .targets import dueling_combine


class Batch:
    """Stacked observations with the propagation matrix precomputed per encoder kind."""

    def __init__(self, feats: np.ndarray, adjacency: np.ndarray, mask: np.ndarray, observations=None):
        self.feats = feats
        self.adjacency = adjacency
        self.mask = mask
        self._obs = observations
        self._prop: dict[str, np.ndarray] = {}

    @classmethod
    def of(cls, observations) -> "Batch":
        return cls(np.array([o.node_features for o in observations]),
                   np.array([o.adjacency for o in observations]),
                   np.array([o.mask for o in observations]), observations)

    def prop(self, encoder: Encoder) -> np.ndarray:
        kind = encoder.kind
        if kind not in self._prop:
            if self._obs is None:
                self._prop[kind] = encoder.propagation(self.adjacency, self.mask)
            else:
                self._prop[kind] = np.array([_obs_prop(o, encoder) for o in self._obs])
        return self._prop[kind]


def _obs_prop(obs, encoder: Encoder) -> np.ndarray:
    if encoder.kind not in obs.cache:
        obs.cache[encoder.kind] = encoder.propagation(obs.adjacency, obs.mask)
    return obs.cache[encoder.kind]


class EncodedNet(Module):
    """Encoder output concatenated with each slot's own (masked) input features.

    Densely connected AV pairs average an AV's embedding with the whole fleet;
    the parameter-free skip keeps its own lane, position and intention visible
    to the heads.  Both encoder kinds get it, so the arms stay parameter-matched.
    """

    def __init__(self, rng, kind: str, in_features: int, widths: Sequence[int]):
        self.encoder = Encoder(rng, kind, in_features, widths)
        self.embed_dim = self.encoder.out_features + in_features

    def embed(self, batch: Batch, feats=None) -> Tensor:
        f = T.as_tensor(batch.feats if feats is None else feats)
        z = self.encoder(f, batch.prop(self.encoder), batch.mask)
        return T.concat([z, f * np.asarray(batch.mask)[..., None]], axis=-1)


class QNetwork(EncodedNet):
    """Per-slot action values, optionally with a dueling value/advantage split."""

    def __init__(self, rng, kind, in_features, widths, n_actions: int, dueling: bool = False,
                 head_width: int = 32):
        super().__init__(rng, kind, in_features, widths)
        d = self.embed_dim
        self.dueling = dueling
        if dueling:
            self.value_head = MLP(rng, [d, head_width, 1])
            self.adv_head = MLP(rng, [d, head_width, n_actions])
        else:
            self.head = MLP(rng, [d, head_width, n_actions])

    def __call__(self, batch: Batch) -> Tensor:
        z = self.embed(batch)
        if self.dueling:
            return dueling_combine(self.value_head(z), self.adv_head(z))
        return self.head(z)


class CategoricalActor(EncodedNet):
    def __init__(self, rng, kind, in_features, widths, n_actions: int, head_width: int = 32):
        super().__init__(rng, kind, in_features, widths)
        self.head = MLP(rng, [self.embed_dim, head_width, n_actions])

    def __call__(self, batch: Batch) -> Tensor:
        return self.head(self.embed(batch))


class BoundedHead(Module):
    """Maps embeddings into ``[a_min, a_max]`` through ``tanh``.

    The output layer starts near zero, so every slot initially commands the
    centre of the range instead of an arbitrary constant acceleration.
    """

    def __init__(self, rng, in_features: int, head_width: int, a_min: float, a_max: float):
        self.mlp = MLP(rng, [in_features, head_width, 1])
        out = self.mlp.layers[-1]
        out.weight.data = out.weight.data * 0.01
        self._center = 0.5 * (a_max + a_min)
        self._half = 0.5 * (a_max - a_min)

    def __call__(self, z) -> Tensor:
        raw = T.reshape(self.mlp(z), z.shape[:-1])
        return T.tanh(raw) * self._half + self._center


class GaussianActor(EncodedNet):
    """Per-slot Gaussian with a shared, state-independent log standard deviation."""

    def __init__(self, rng, kind, in_features, widths, a_min: float, a_max: float,
                 head_width: int = 32, init_std: float = 0.2):
        super().__init__(rng, kind, in_features, widths)
        self.mean_head = BoundedHead(rng, self.embed_dim, head_width, a_min, a_max)
        # init_std is a fraction of a_max
        self.log_std = T.parameter(np.array([math.log(init_std * a_max)]))

    def __call__(self, batch: Batch) -> Tensor:
        return self.mean_head(self.embed(batch))


class DeterministicActor(EncodedNet):
    def __init__(self, rng, kind, in_features, widths, a_min: float, a_max: float,
                 head_width: int = 32):
        super().__init__(rng, kind, in_features, widths)
        self.head = BoundedHead(rng, self.embed_dim, head_width, a_min, a_max)

    def __call__(self, batch: Batch) -> Tensor:
        return self.head(self.embed(batch))


class ValueCritic(EncodedNet):
    """Centralized state value from pooled node embeddings."""

    def __init__(self, rng, kind, in_features, widths, head_width: int = 32):
        super().__init__(rng, kind, in_features, widths)
        self.head = MLP(rng, [self.embed_dim, head_width, 1])

    def __call__(self, batch: Batch) -> Tensor:
        pooled = pool_global(self.embed(batch), batch.mask)
        return T.reshape(self.head(pooled), (batch.feats.shape[0],))


class ActionCritic(EncodedNet):
    """Centralized ``Q(s, a)``: each slot's action (scaled by ``a_scale``) is appended to its features."""

    def __init__(self, rng, kind, in_features, widths, a_scale: float, head_width: int = 32):
        super().__init__(rng, kind, in_features + 1, widths)
        self.head = MLP(rng, [self.embed_dim, head_width, 1])
        self._a_scale = a_scale

    def __call__(self, batch: Batch, actions) -> Tensor:
        a = T.as_tensor(actions) * (1.0 / self._a_scale)
        feats = T.concat([T.as_tensor(batch.feats), T.reshape(a, a.shape + (1,))], axis=-1)
        pooled = pool_global(self.embed(batch, feats), batch.mask)
        return T.reshape(self.head(pooled), (batch.feats.shape[0],))
