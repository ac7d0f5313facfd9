"""DQN family with a shared per-slot Q head."""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..tensor import no_grad
from .base import Agent
from .networks import Batch, QNetwork
from .policy import VALUES, PolicyOutput, act, linear_schedule
from .replay import PrioritizedReplayBuffer, ReplayBuffer, Transition, per_sample
from .targets import double_dqn_target, dqn_target, q_loss


class DQNAgent(Agent):
    algorithm = "dqn"
    supports_continuous = False
    double = False
    dueling = False
    prioritized = False

    def __init__(self, spec, cfg, encoder_kind, widths, rng, total_steps=1, init_rng=None):
        super().__init__(spec, cfg, encoder_kind, widths, rng, total_steps, init_rng)
        init = self.init_rng
        self.online = QNetwork(init, encoder_kind, spec.n_features, widths, spec.n_actions,
                               self.dueling, cfg.head_width)
        self.target = QNetwork(init, encoder_kind, spec.n_features, widths, spec.n_actions,
                               self.dueling, cfg.head_width)
        self.target.copy_from(self.online)
        self.opt = self._optimizer([self.online], cfg.lr)
        if self.prioritized:
            self.buffer = PrioritizedReplayBuffer(cfg.replay_capacity, cfg.per_alpha)
        else:
            self.buffer = ReplayBuffer(cfg.replay_capacity)

    def networks(self):
        return {"q": self.online, "q_target": self.target}

    @property
    def epsilon(self) -> float:
        c = self.cfg
        return linear_schedule(c.eps_start, c.eps_end, c.eps_fraction * self.total_steps, self.steps)

    def q_values(self, obs) -> np.ndarray:
        with no_grad():
            return self.online(Batch.of([obs])).data[0]

    def policy(self, obs) -> PolicyOutput:
        return PolicyOutput(VALUES, values=self.q_values(obs))

    def act(self, obs, mode):
        return act(self.policy(obs), mode, self.rng, epsilon=self.epsilon)

    def observe(self, obs, actions, reward, next_obs, done, episode_end):
        super().observe(obs, actions, reward, next_obs, done, episode_end)
        if self.spec.agent_mask(obs.mask).any():
            self.buffer.add(Transition(obs, np.asarray(actions, dtype=np.int64), float(reward),
                                       next_obs, bool(done), obs.mask.copy()))
        c = self.cfg
        if len(self.buffer) >= max(c.learning_starts, c.batch_size) and self.steps % c.train_freq == 0:
            self.update()

    def targets(self, rewards, next_batch: Batch, dones, next_mask) -> np.ndarray:
        with no_grad():
            q_next_t = self.target(next_batch).data
            if self.double:
                q_next_o = self.online(next_batch).data
                return double_dqn_target(rewards, q_next_o, q_next_t, dones, next_mask, self.cfg.gamma)
        return dqn_target(rewards, q_next_t, dones, next_mask, self.cfg.gamma)

    def update_on(self, batch_items, weights=None):
        """One gradient step on ``batch_items``; returns (loss, per-sample |TD| error)."""
        spec = self.spec
        batch = Batch.of([t.obs for t in batch_items])
        next_batch = Batch.of([t.next_obs for t in batch_items])
        actions = np.stack([t.actions for t in batch_items])
        rewards = np.array([t.reward for t in batch_items])
        dones = np.array([t.done for t in batch_items], dtype=float)
        mask = spec.agent_mask(batch.mask)
        next_mask = spec.agent_mask(next_batch.mask)
        y = self.targets(rewards, next_batch, dones, next_mask)
        q_taken = T.gather_last(self.online(batch), actions)
        loss = q_loss(q_taken, y * mask, mask, weights)
        td = np.abs(q_taken.data - y) * mask
        per_sample = td.sum(axis=-1) / np.maximum(mask.sum(axis=-1), 1.0)
        value = self._apply(loss, self.opt)
        if self.updates % self.cfg.target_update_period == 0:
            self.target.copy_from(self.online)
        return value, per_sample

    def update(self) -> float:
        c = self.cfg
        if self.prioritized:
            beta = linear_schedule(c.per_beta_start, 1.0, self.total_steps, self.steps)
            items, idx, weights = per_sample(self.buffer, c.batch_size, beta, self.rng)
            loss, td = self.update_on(items, weights)
            self.buffer.update_priorities(idx, td)
            return loss
        items, _ = self.buffer.sample(c.batch_size, self.rng)
        return self.update_on(items)[0]


class DoubleDQNAgent(DQNAgent):
    algorithm = "double_dqn"
    double = True


class DuelingDQNAgent(DQNAgent):
    algorithm = "dueling_dqn"
    dueling = True


class PERDQNAgent(DQNAgent):
    algorithm = "dqn_per"
    prioritized = True
