from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..checkpoint import Checkpoint
from ..graph import GraphObservation
from ..nn import Module
from ..optim import clip_grad_norm, make_optimizer
from ..tensor import backward
from .networks import Batch

ALGORITHMS = ("dqn", "double_dqn", "dueling_dqn", "dqn_per", "reinforce", "ac", "a2c", "ppo",
              "ddpg", "td3")
DISCRETE_ONLY = {"dqn", "double_dqn", "dueling_dqn", "dqn_per"}
CONTINUOUS_ONLY = {"ddpg", "td3"}


class ConfigError(ValueError):
    pass


class AlgoConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: Literal["dqn", "double_dqn", "dueling_dqn", "dqn_per", "reinforce", "ac", "a2c", "ppo",
                "ddpg", "td3"] = "dqn"
    gamma: float = Field(0.99, gt=0, le=1)
    optimizer: Literal["adam", "sgd"] = "adam"
    lr: float = Field(1e-3, gt=0)
    critic_lr: float = Field(1e-3, gt=0)
    batch_size: int = Field(64, ge=1)
    replay_capacity: int = Field(20_000, ge=1)
    learning_starts: int = Field(500, ge=0)
    train_freq: int = Field(1, ge=1)
    target_update_period: int = Field(200, ge=1)
    tau: float = Field(0.005, ge=0, le=1)
    eps_start: float = Field(1.0, ge=0, le=1)
    eps_end: float = Field(0.05, ge=0, le=1)
    eps_fraction: float = Field(0.3, ge=0, le=1)
    action_noise: float = Field(0.3, ge=0)
    per_alpha: float = Field(0.6, ge=0)
    per_beta_start: float = Field(0.4, ge=0, le=1)
    n_steps: int = Field(16, ge=1)
    rollout_steps: int = Field(256, ge=1)
    ppo_clip: float = Field(0.2, gt=0)
    ppo_epochs: int = Field(4, ge=1)
    minibatch_size: int = Field(64, ge=1)
    gae_lambda: float = Field(0.95, ge=0, le=1)
    normalize_advantages: bool = True
    normalize_returns: bool = True
    entropy_coef: float = Field(0.01, ge=0)
    init_std: float = Field(0.2, gt=0)  # fraction of a_max
    value_coef: float = Field(0.5, ge=0)
    td3_policy_delay: int = Field(2, ge=1)
    td3_target_noise: float = Field(0.2, ge=0)
    td3_noise_clip: float = Field(0.5, ge=0)
    max_grad_norm: float = Field(10.0, ge=0)
    head_width: int = Field(32, ge=1)


@dataclass
class EnvSpec:
    """What an agent needs to know about the environment it controls."""
    n_slots: int
    n_features: int
    discrete: bool
    n_actions: int = 3
    a_min: float = -1.0
    a_max: float = 1.0
    agent_slots: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.agent_slots is None:
            self.agent_slots = np.ones(self.n_slots)

    def agent_mask(self, occupancy: np.ndarray) -> np.ndarray:
        return occupancy * self.agent_slots


class Agent:
    """Common agent surface used by the harness.

    ``act`` returns one action per slot; ``observe`` ingests a training
    transition and may update; ``end_episode`` flushes episode-based learners.
    """

    algorithm = "base"
    supports_discrete = True
    supports_continuous = True

    def __init__(self, spec: EnvSpec, cfg: AlgoConfig, encoder_kind: str, widths,
                 rng: np.random.Generator, total_steps: int = 1,
                 init_rng: np.random.Generator | None = None):
        if spec.discrete and not self.supports_discrete:
            raise ConfigError(f"{self.algorithm} needs a continuous action space")
        if not spec.discrete and not self.supports_continuous:
            raise ConfigError(f"{self.algorithm} needs a discrete action space")
        self.spec = spec
        self.cfg = cfg
        self.encoder_kind = encoder_kind
        self.widths = tuple(widths)
        self.rng = rng
        # Weight init draws from its own stream so exploration changes leave initial weights alone.
        self.init_rng = init_rng if init_rng is not None else np.random.default_rng(rng.integers(2**63))
        self.total_steps = max(int(total_steps), 1)
        self.steps = 0
        self.updates = 0
        self.last_loss = 0.0

    # -- to override
    def networks(self) -> dict[str, Module]:
        raise NotImplementedError

    def policy(self, obs: GraphObservation):
        raise NotImplementedError

    def act(self, obs: GraphObservation, mode: str) -> np.ndarray:
        raise NotImplementedError

    def observe(self, obs, actions, reward, next_obs, done, episode_end) -> None:
        self.steps += 1

    def end_episode(self) -> None:
        pass

    # -- shared helpers
    def _optimizer(self, modules, lr):
        params = [p for m in modules for p in m.parameters()]
        return make_optimizer(self.cfg.optimizer, params, lr)

    def _apply(self, loss, opt) -> float:
        value = float(loss.data)
        if not np.isfinite(value):
            self.last_loss = value
            raise FloatingPointError(f"{self.algorithm}: non-finite loss")
        backward(loss, opt.params)
        clip_grad_norm(opt.params, self.cfg.max_grad_norm)
        opt.step()
        self.updates += 1
        self.last_loss = value
        return value

    def _batch(self, observations) -> Batch:
        return Batch.of(observations)

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, net in self.networks().items():
            for name, arr in net.state_dict().items():
                out[f"{prefix}.{name}"] = arr
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for prefix, net in self.networks().items():
            sub = {k[len(prefix) + 1:]: v for k, v in state.items() if k.startswith(prefix + ".")}
            net.load_state_dict(sub)

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(self.algorithm, self.encoder_kind, self.state_dict())
