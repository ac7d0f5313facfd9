"""Learning algorithms and the id → agent registry."""

import numpy as np

from .base import ALGORITHMS, CONTINUOUS_ONLY, DISCRETE_ONLY, Agent, AlgoConfig, ConfigError, EnvSpec
from .ddpg import DDPGAgent, TD3Agent
from .dqn import DoubleDQNAgent, DQNAgent, DuelingDQNAgent, PERDQNAgent
from .pg import A2CAgent, ACAgent, PPOAgent, ReinforceAgent

REGISTRY = {cls.algorithm: cls for cls in (DQNAgent, DoubleDQNAgent, DuelingDQNAgent, PERDQNAgent,
                                           ReinforceAgent, ACAgent, A2CAgent, PPOAgent,
                                           DDPGAgent, TD3Agent)}
assert tuple(REGISTRY) == ALGORITHMS


def make_agent(spec: EnvSpec, cfg: AlgoConfig, encoder_kind: str, widths=(32, 32), rng=None,
               total_steps: int = 1, init_rng=None) -> Agent:
    if cfg.id not in REGISTRY:
        raise ConfigError(f"unknown algorithm {cfg.id!r}")
    rng = rng if rng is not None else np.random.default_rng(0)
    return REGISTRY[cfg.id](spec, cfg, encoder_kind, widths, rng, total_steps, init_rng)


def supports(algorithm: str, discrete: bool) -> bool:
    cls = REGISTRY[algorithm]
    return cls.supports_discrete if discrete else cls.supports_continuous


__all__ = ["ALGORITHMS", "REGISTRY", "Agent", "AlgoConfig", "ConfigError", "EnvSpec", "make_agent",
           "supports", "DISCRETE_ONLY", "CONTINUOUS_ONLY"]
