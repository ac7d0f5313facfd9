"""Per-slot policy outputs and action selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VALUES, PROBS, GAUSSIAN, DETERMINISTIC = "values", "probs", "gaussian", "deterministic"
TRAIN, EVAL = "train", "eval"


class PolicyError(ValueError):
    pass


@dataclass
class PolicyOutput:
    """One of: action values ``(S, A)``, action probabilities ``(S, A)``,
    Gaussian ``mean``/``std`` ``(S,)``, or a deterministic ``action`` ``(S,)``."""

    kind: str
    values: np.ndarray | None = None
    probs: np.ndarray | None = None
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    action: np.ndarray | None = None

    def arrays(self) -> list[np.ndarray]:
        return [a for a in (self.values, self.probs, self.mean, self.std, self.action) if a is not None]


def act(policy: PolicyOutput, mode: str, rng: np.random.Generator, *, epsilon: float = 0.0,
        noise_std: float = 0.0, a_min: float = -np.inf, a_max: float = np.inf) -> np.ndarray:
    """Pick one action per slot.

    Value policies are epsilon-greedy in train mode and greedy in eval;
    stochastic policies sample in train and take the mode/mean in eval;
    deterministic policies add Gaussian exploration noise in train.
    Continuous actions are clamped to ``[a_min, a_max]``.
    """
    if mode not in (TRAIN, EVAL):
        raise ValueError(f"unknown mode {mode!r}")
    for arr in policy.arrays():
        if not np.all(np.isfinite(arr)):
            raise PolicyError("non-finite policy output (training diverged)")
    train = mode == TRAIN

    if policy.kind == VALUES:
        q = policy.values
        greedy = np.argmax(q, axis=-1)
        if not train:
            return greedy
        u = rng.random(q.shape[0])
        rand = rng.integers(0, q.shape[-1], size=q.shape[0])
        return np.where(u < epsilon, rand, greedy)

    if policy.kind == PROBS:
        p = policy.probs
        if not train:
            return np.argmax(p, axis=-1)
        cdf = np.cumsum(p, axis=-1)
        u = rng.random(p.shape[0])[:, None] * cdf[:, -1:]
        return np.minimum((u >= cdf).sum(axis=-1), p.shape[-1] - 1)

    if policy.kind == GAUSSIAN:
        a = policy.mean + policy.std * rng.standard_normal(policy.mean.shape) if train else policy.mean
        return np.clip(a, a_min, a_max)

    if policy.kind == DETERMINISTIC:
        a = policy.action
        if train and noise_std > 0:
            a = a + noise_std * rng.standard_normal(a.shape)
        return np.clip(a, a_min, a_max)

    raise ValueError(f"unknown policy kind {policy.kind!r}")


def linear_schedule(start: float, end: float, duration: float, t: float) -> float:
    if duration <= 0:
        return end
    frac = min(max(t / duration, 0.0), 1.0)
    return start + frac * (end - start)
