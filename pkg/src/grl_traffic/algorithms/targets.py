"""Bootstrap targets, return estimators and masked losses shared by the agents.

Array conventions: batch ``B``, slots ``S``, actions ``A``.  ``mask`` is
``(B, S)`` with 1 on slots that act; all losses average over those slots.
"""

from __future__ import annotations

import math

import numpy as np

from .. import tensor as T
from ..tensor import Tensor

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def dqn_target(rewards: np.ndarray, next_q_target: np.ndarray, dones: np.ndarray,
               next_mask: np.ndarray, gamma: float) -> np.ndarray:
    """``r + gamma * max_a Q'(s', a)`` per slot; no bootstrap on done or vacated slots."""
    cont = (1.0 - np.asarray(dones, dtype=float))[:, None] * next_mask
    return np.asarray(rewards, dtype=float)[:, None] + gamma * cont * next_q_target.max(axis=-1)


def double_dqn_target(rewards: np.ndarray, next_q_online: np.ndarray, next_q_target: np.ndarray,
                      dones: np.ndarray, next_mask: np.ndarray, gamma: float) -> np.ndarray:
    """Online network picks the next action, target network scores it."""
    pick = np.argmax(next_q_online, axis=-1)[..., None]
    value = np.take_along_axis(next_q_target, pick, axis=-1)[..., 0]
    cont = (1.0 - np.asarray(dones, dtype=float))[:, None] * next_mask
    return np.asarray(rewards, dtype=float)[:, None] + gamma * cont * value


def dueling_combine(value, advantage) -> Tensor:
    """``Q = V + A - mean_a A``; ``value`` is ``(..., 1)``, ``advantage`` is ``(..., A)``."""
    advantage = T.as_tensor(advantage)
    return T.as_tensor(value) + advantage - T.mean(advantage, axis=-1, keepdims=True)


def masked_mean(x, mask: np.ndarray, weights: np.ndarray | None = None) -> Tensor:
    """Mean of ``x`` over masked entries, optionally weighted per batch row."""
    m = np.asarray(mask, dtype=float)
    if weights is not None:
        m = m * np.asarray(weights, dtype=float)[:, None]
    return T.tsum(T.as_tensor(x) * m) / max(float(np.sum(mask)), 1.0)


def q_loss(q_taken, targets: np.ndarray, mask: np.ndarray,
           weights: np.ndarray | None = None) -> Tensor:
    return masked_mean(T.square(T.as_tensor(q_taken) - targets), mask, weights)


def discounted_returns(rewards, gamma: float) -> np.ndarray:
    """Returns-to-go ``G_t = sum_k gamma^(k-t) r_k``."""
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def n_step_returns(rewards, dones, bootstrap: float, gamma: float) -> np.ndarray:
    """Backward n-step returns seeded with ``bootstrap``, cut at terminal steps."""
    out = np.zeros(len(rewards))
    acc = bootstrap
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * (0.0 if dones[t] else acc)
        out[t] = acc
    return out


def gae(rewards, values, next_values, dones, episode_ends, gamma: float, lam: float) -> np.ndarray:
    """Generalized advantage estimates.

    ``next_values[t]`` is ``V(s_{t+1})``; ``dones`` stop bootstrapping and
    ``episode_ends`` stop the recursion (truncation keeps the bootstrap).
    """
    adv = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        cont = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * cont * next_values[t] - values[t]
        if episode_ends[t]:
            acc = 0.0
        acc = delta + gamma * lam * cont * acc
        adv[t] = acc
    return adv


def normalize(x: np.ndarray) -> np.ndarray:
    std = x.std()
    return (x - x.mean()) / std if std > 1e-8 else x - x.mean()


def categorical_log_prob(logits, actions: np.ndarray) -> Tensor:
    return T.gather_last(T.log_softmax(logits), actions)


def categorical_entropy(logits) -> Tensor:
    logp = T.log_softmax(logits)
    return -T.tsum(T.exp(logp) * logp, axis=-1)


def gaussian_log_prob(actions: np.ndarray, mean, log_std) -> Tensor:
    log_std = T.as_tensor(log_std)
    z = (T.as_tensor(actions) - mean) * T.exp(-log_std)
    return -0.5 * T.square(z) - log_std - LOG_SQRT_2PI


def gaussian_entropy(log_std) -> Tensor:
    return T.as_tensor(log_std) + (0.5 + LOG_SQRT_2PI)


def policy_gradient_loss(log_prob, weights: np.ndarray, mask: np.ndarray) -> Tensor:
    """``-mean(log_pi * w)`` over masked slots; ``weights`` is per sample ``(B,)``."""
    return -masked_mean(T.as_tensor(log_prob) * np.asarray(weights, dtype=float)[:, None], mask)


def ppo_surrogate(log_prob, old_log_prob: np.ndarray, advantages: np.ndarray,
                  mask: np.ndarray, clip_eps: float) -> Tensor:
    """Negative clipped surrogate ``-mean(min(rho*A, clip(rho)*A))`` over masked slots."""
    ratio = T.exp(T.as_tensor(log_prob) - old_log_prob)
    adv = np.asarray(advantages, dtype=float)[:, None]
    unclipped = ratio * adv
    clipped = T.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv
    return -masked_mean(T.minimum(unclipped, clipped), mask)


def value_loss(values, targets: np.ndarray, weights: np.ndarray | None = None) -> Tensor:
    err = T.square(T.as_tensor(values) - targets)
    if weights is not None:
        err = err * weights
    return T.mean(err)
