"""Policy-gradient family: REINFORCE, AC, A2C and PPO.

All four share one actor (categorical for discrete action spaces, Gaussian
with a learned state-independent log-std for continuous ones).  AC, A2C and
PPO add a centralized value critic over pooled node embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from ..optim import clip_grad_norm
from ..tensor import backward, no_grad
from .base import Agent
from .networks import Batch, CategoricalActor, GaussianActor, ValueCritic
from .policy import GAUSSIAN, PROBS, PolicyOutput, act
from .targets import (categorical_entropy, categorical_log_prob, discounted_returns, gae,
                      gaussian_entropy, gaussian_log_prob, masked_mean, n_step_returns, normalize,
                      policy_gradient_loss, ppo_surrogate, value_loss)


@dataclass
class Step:
    obs: object
    actions: np.ndarray
    reward: float
    next_obs: object
    done: bool
    episode_end: bool


class PolicyGradientAgent(Agent):
    uses_critic = True

    def __init__(self, spec, cfg, encoder_kind, widths, rng, total_steps=1, init_rng=None):
        super().__init__(spec, cfg, encoder_kind, widths, rng, total_steps, init_rng)
        init = self.init_rng
        if spec.discrete:
            self.actor = CategoricalActor(init, encoder_kind, spec.n_features, widths,
                                          spec.n_actions, cfg.head_width)
        else:
            self.actor = GaussianActor(init, encoder_kind, spec.n_features, widths,
                                       spec.a_min, spec.a_max, cfg.head_width, cfg.init_std)
        self.actor_opt = self._optimizer([self.actor], cfg.lr)
        if self.uses_critic:
            self.critic = ValueCritic(init, encoder_kind, spec.n_features, widths, cfg.head_width)
            self.critic_opt = self._optimizer([self.critic], cfg.critic_lr)
        self.steps_buffer: list[Step] = []

    def networks(self):
        nets = {"actor": self.actor}
        if self.uses_critic:
            nets["critic"] = self.critic
        return nets

    # -- distribution helpers
    def log_prob(self, batch: Batch, actions: np.ndarray):
        out = self.actor(batch)
        if self.spec.discrete:
            return categorical_log_prob(out, actions.astype(np.int64)), out
        return gaussian_log_prob(actions, out, self.actor.log_std), out

    def entropy(self, batch: Batch, out):
        mask = self.spec.agent_mask(batch.mask)
        if self.spec.discrete:
            return masked_mean(categorical_entropy(out), mask)
        return T.mean(gaussian_entropy(self.actor.log_std))

    def policy(self, obs) -> PolicyOutput:
        with no_grad():
            out = self.actor(Batch.of([obs])).data[0]
        if self.spec.discrete:
            e = np.exp(out - out.max(axis=-1, keepdims=True))
            return PolicyOutput(PROBS, probs=e / e.sum(axis=-1, keepdims=True))
        std = np.full_like(out, float(np.exp(self.actor.log_std.data[0])))
        return PolicyOutput(GAUSSIAN, mean=out, std=std)

    def act(self, obs, mode):
        a = act(self.policy(obs), mode, self.rng, a_min=self.spec.a_min, a_max=self.spec.a_max)
        return a if not self.spec.discrete else a.astype(np.int64)

    def values(self, batch: Batch) -> np.ndarray:
        with no_grad():
            return self.critic(batch).data

    def _apply_joint(self, loss, opts) -> float:
        """Backpropagate one loss into several optimizers, each clipped separately."""
        value = float(loss.data)
        if not np.isfinite(value):
            self.last_loss = value
            raise FloatingPointError(f"{self.algorithm}: non-finite loss")
        backward(loss, [p for o in opts for p in o.params])
        for o in opts:
            clip_grad_norm(o.params, self.cfg.max_grad_norm)
            o.step()
        self.updates += 1
        self.last_loss = value
        return value

    def observe(self, obs, actions, reward, next_obs, done, episode_end):
        super().observe(obs, actions, reward, next_obs, done, episode_end)
        self.steps_buffer.append(Step(obs, np.asarray(actions), float(reward), next_obs,
                                      bool(done), bool(episode_end or done)))
        if self.ready():
            self.update()
            self.steps_buffer = []

    def ready(self) -> bool:
        return self.steps_buffer[-1].episode_end

    def end_episode(self) -> None:
        # Episode-based learners discard a partial episode; the harness always ends on episode_end.
        if self.steps_buffer and self.ready():
            self.update()
        self.steps_buffer = []

    def update(self) -> float:
        raise NotImplementedError


class ReinforceAgent(PolicyGradientAgent):
    algorithm = "reinforce"
    uses_critic = False

    def update(self) -> float:
        steps = self.steps_buffer
        returns = discounted_returns([s.reward for s in steps], self.cfg.gamma)
        if self.cfg.normalize_returns and len(returns) > 1:
            returns = normalize(returns)
        batch = Batch.of([s.obs for s in steps])
        logp, _ = self.log_prob(batch, np.stack([s.actions for s in steps]))
        loss = policy_gradient_loss(logp, returns, self.spec.agent_mask(batch.mask))
        return self._apply(loss, self.actor_opt)


class ACAgent(PolicyGradientAgent):
    """One-step actor-critic: the TD target weights the log-likelihood directly."""

    algorithm = "ac"

    def ready(self) -> bool:
        return True

    def update(self) -> float:
        steps = self.steps_buffer
        batch = Batch.of([s.obs for s in steps])
        next_batch = Batch.of([s.next_obs for s in steps])
        rewards = np.array([s.reward for s in steps])
        cont = 1.0 - np.array([s.done for s in steps], dtype=float)
        y = rewards + self.cfg.gamma * cont * self.values(next_batch)
        logp, _ = self.log_prob(batch, np.stack([s.actions for s in steps]))
        actor_loss = policy_gradient_loss(logp, y, self.spec.agent_mask(batch.mask))
        critic_loss = value_loss(self.critic(batch), y)
        return self._apply_joint(actor_loss + critic_loss * self.cfg.value_coef,
                                 [self.actor_opt, self.critic_opt])


class A2CAgent(PolicyGradientAgent):
    """n-step advantage actor-critic with an entropy bonus."""

    algorithm = "a2c"

    def ready(self) -> bool:
        return len(self.steps_buffer) >= self.cfg.n_steps or self.steps_buffer[-1].episode_end

    def update(self) -> float:
        steps = self.steps_buffer
        cfg = self.cfg
        batch = Batch.of([s.obs for s in steps])
        last = steps[-1]
        bootstrap = 0.0 if last.done else float(self.values(Batch.of([last.next_obs]))[0])
        returns = n_step_returns([s.reward for s in steps], [s.done for s in steps], bootstrap,
                                 cfg.gamma)
        v = self.critic(batch)
        adv = returns - v.data
        mask = self.spec.agent_mask(batch.mask)
        logp, out = self.log_prob(batch, np.stack([s.actions for s in steps]))
        loss = (policy_gradient_loss(logp, adv, mask) + value_loss(v, returns) * cfg.value_coef
                - self.entropy(batch, out) * cfg.entropy_coef)
        return self._apply_joint(loss, [self.actor_opt, self.critic_opt])


class PPOAgent(PolicyGradientAgent):
    """Clipped-surrogate PPO over fixed-length rollouts with GAE advantages."""

    algorithm = "ppo"

    def ready(self) -> bool:
        return len(self.steps_buffer) >= self.cfg.rollout_steps

    def end_episode(self) -> None:
        # Rollouts span episode boundaries; episode_end flags cut the GAE recursion.
        pass

    def update(self) -> float:
        steps = self.steps_buffer
        cfg = self.cfg
        batch = Batch.of([s.obs for s in steps])
        next_batch = Batch.of([s.next_obs for s in steps])
        values = self.values(batch)
        next_values = self.values(next_batch)
        adv = gae([s.reward for s in steps], values, next_values, [s.done for s in steps],
                  [s.episode_end for s in steps], cfg.gamma, cfg.gae_lambda)
        returns = adv + values
        if cfg.normalize_advantages and len(adv) > 1:
            adv = normalize(adv)
        actions = np.stack([s.actions for s in steps])
        # The actor is frozen while a rollout is collected, so this equals the behaviour log-prob.
        with no_grad():
            old_logp = self.log_prob(batch, actions)[0].data
        n = len(steps)
        loss_value = 0.0
        for _ in range(cfg.ppo_epochs):
            order = self.rng.permutation(n)
            for start in range(0, n, cfg.minibatch_size):
                idx = order[start:start + cfg.minibatch_size]
                mb = Batch(batch.feats[idx], batch.adjacency[idx], batch.mask[idx])
                mask = self.spec.agent_mask(mb.mask)
                logp, out = self.log_prob(mb, actions[idx])
                loss = (ppo_surrogate(logp, old_logp[idx], adv[idx], mask, cfg.ppo_clip)
                        + value_loss(self.critic(mb), returns[idx]) * cfg.value_coef
                        - self.entropy(mb, out) * cfg.entropy_coef)
                loss_value = self._apply_joint(loss, [self.actor_opt, self.critic_opt])
        return loss_value
