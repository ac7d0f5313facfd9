"""Deterministic actor-critic methods for continuous actions: DDPG and TD3."""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..tensor import no_grad
from .base import Agent
from .networks import ActionCritic, Batch, DeterministicActor
from .policy import DETERMINISTIC, PolicyOutput, act
from .replay import ReplayBuffer, Transition
from .targets import value_loss


def smoothed_target_actions(mu_next: np.ndarray, noise: np.ndarray, noise_clip: float,
                            a_min: float, a_max: float) -> np.ndarray:
    """Target-policy smoothing: ``clip(mu' + clip(noise, -c, c), a_min, a_max)``."""
    return np.clip(mu_next + np.clip(noise, -noise_clip, noise_clip), a_min, a_max)


def critic_target(rewards, q_next: np.ndarray, dones, gamma: float) -> np.ndarray:
    return np.asarray(rewards, float) + gamma * (1.0 - np.asarray(dones, float)) * q_next


class DDPGAgent(Agent):
    algorithm = "ddpg"
    supports_discrete = False
    twin = False

    def __init__(self, spec, cfg, encoder_kind, widths, rng, total_steps=1, init_rng=None):
        super().__init__(spec, cfg, encoder_kind, widths, rng, total_steps, init_rng)
        init = self.init_rng
        args = (init, encoder_kind, spec.n_features, widths)
        a_scale = max(abs(spec.a_min), abs(spec.a_max))
        self.actor = DeterministicActor(*args, spec.a_min, spec.a_max, cfg.head_width)
        self.actor_target = DeterministicActor(*args, spec.a_min, spec.a_max, cfg.head_width)
        self.critics = [ActionCritic(*args, a_scale, cfg.head_width) for _ in range(2 if self.twin else 1)]
        self.critic_targets = [ActionCritic(*args, a_scale, cfg.head_width) for _ in self.critics]
        self.actor_target.copy_from(self.actor)
        for tgt, src in zip(self.critic_targets, self.critics):
            tgt.copy_from(src)
        self.actor_opt = self._optimizer([self.actor], cfg.lr)
        self.critic_opts = [self._optimizer([c], cfg.critic_lr) for c in self.critics]
        self.buffer = ReplayBuffer(cfg.replay_capacity)
        self.critic_updates = 0

    def networks(self):
        nets = {"actor": self.actor, "actor_target": self.actor_target}
        for i, (c, t) in enumerate(zip(self.critics, self.critic_targets), start=1):
            nets[f"critic{i}"] = c
            nets[f"critic{i}_target"] = t
        return nets

    def policy(self, obs) -> PolicyOutput:
        with no_grad():
            return PolicyOutput(DETERMINISTIC, action=self.actor(Batch.of([obs])).data[0])

    def act(self, obs, mode):
        return act(self.policy(obs), mode, self.rng, noise_std=self.cfg.action_noise,
                   a_min=self.spec.a_min, a_max=self.spec.a_max)

    def observe(self, obs, actions, reward, next_obs, done, episode_end):
        super().observe(obs, actions, reward, next_obs, done, episode_end)
        mask = self.spec.agent_mask(obs.mask)
        if mask.any():
            # Non-agent slots carry no action; zero them so the critic never sees stale values.
            self.buffer.add(Transition(obs, np.asarray(actions, float) * mask, float(reward),
                                       next_obs, bool(done), obs.mask.copy()))
        c = self.cfg
        if len(self.buffer) >= max(c.learning_starts, c.batch_size) and self.steps % c.train_freq == 0:
            items, _ = self.buffer.sample(c.batch_size, self.rng)
            self.update_on(items)

    def target_actions(self, next_batch: Batch) -> np.ndarray:
        with no_grad():
            return self.actor_target(next_batch).data

    def update_on(self, items) -> float:
        spec, cfg = self.spec, self.cfg
        batch = Batch.of([t.obs for t in items])
        next_batch = Batch.of([t.next_obs for t in items])
        actions = np.stack([t.actions for t in items])
        rewards = np.array([t.reward for t in items])
        dones = np.array([t.done for t in items], dtype=float)
        a_next = self.target_actions(next_batch) * spec.agent_mask(next_batch.mask)
        with no_grad():
            q_next = np.min([t(next_batch, a_next).data for t in self.critic_targets], axis=0)
        y = critic_target(rewards, q_next, dones, cfg.gamma)
        loss = 0.0
        for critic, opt in zip(self.critics, self.critic_opts):
            loss = self._apply(value_loss(critic(batch, actions), y), opt)
        self.critic_updates += 1
        if self.critic_updates % self.policy_delay == 0:
            mu = self.actor(batch) * spec.agent_mask(batch.mask)
            self._apply(-T.mean(self.critics[0](batch, mu)), self.actor_opt)
            self.soft_update()
        return loss

    @property
    def policy_delay(self) -> int:
        return 1

    def soft_update(self) -> None:
        tau = self.cfg.tau
        self.actor_target.copy_from(self.actor, tau)
        for tgt, src in zip(self.critic_targets, self.critics):
            tgt.copy_from(src, tau)


class TD3Agent(DDPGAgent):
    """Twin critics, clipped target-policy noise and delayed actor/target updates."""

    algorithm = "td3"
    twin = True

    @property
    def policy_delay(self) -> int:
        return self.cfg.td3_policy_delay

    def target_actions(self, next_batch: Batch) -> np.ndarray:
        mu = super().target_actions(next_batch)
        noise = self.cfg.td3_target_noise * self.rng.standard_normal(mu.shape)
        return smoothed_target_actions(mu, noise, self.cfg.td3_noise_clip, self.spec.a_min,
                                       self.spec.a_max)
