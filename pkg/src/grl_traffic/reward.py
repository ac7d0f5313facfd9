"""Scenario reward functions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .traffic.core import Kind, ScenarioConfig, SimEvents, VehicleState


class RewardWeights(BaseModel):
    """Weights of intention, average-speed, lane-change and collision terms."""

    model_config = ConfigDict(extra="forbid")

    w1: float = 1.0
    w2: float = 1.0
    w3: float = -0.1
    w4: float = -10.0
    v_desired_mps: float = Field(140.0 / 3.6, gt=0)

    @model_validator(mode="after")
    def _signs(self):
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("w1 and w2 must be >= 0")
        if self.w3 > 0 or self.w4 > 0:
            raise ValueError("w3 and w4 must be <= 0")
        return self


@dataclass(frozen=True)
class RewardBreakdown:
    r_intention: float
    r_avg_speed: float
    p_lane_change: float
    p_collision: float
    total: float


def intention_reward(v: VehicleState, cfg: ScenarioConfig) -> float:
    """Road-section intention reward of one AV.

    Ramp-1 AVs: ``-x/L1`` on the leftmost lane, ``1 - x/L1`` on the rightmost,
    both before ramp 1.  Ramp-2 AVs: ``-x/L1`` on the rightmost lane before
    ramp 1; after it ``-(x-L1)/(L2-L1)`` leftmost and ``1 - (x-L1)/(L2-L1)``
    rightmost.  Everything else is 0.
    """
    if not v.is_av:
        raise ValueError(f"intention reward is defined for AVs only (vehicle {v.id} is an HV)")
    left, right = 0, cfg.n_lanes - 1
    L1, L2 = cfg.ramp1_pos_m, cfg.ramp2_pos_m
    x = v.pos_m
    if v.kind is Kind.AV_RAMP1 and x <= L1:
        if v.lane == right:
            return 1.0 - x / L1
        if v.lane == left:
            return -x / L1
    elif v.kind is Kind.AV_RAMP2:
        if x < L1:
            if v.lane == right:
                return -x / L1
        elif x <= L2:
            dx = x - L1
            if v.lane == right:
                return 1.0 - dx / (L2 - L1)
            if v.lane == left:
                return -dx / (L2 - L1)
    return 0.0


def average_speed_reward(vehicles: Iterable[VehicleState], cfg: ScenarioConfig) -> float:
    speeds = [v.speed_mps for v in vehicles if v.is_av and v.alive]
    if not speeds:
        return 0.0
    return sum(speeds) / len(speeds) / cfg.v_max_av_mps


def highway_reward(vehicles: Sequence[VehicleState], events: SimEvents, w: RewardWeights,
                   cfg: ScenarioConfig) -> RewardBreakdown:
    avs = [v for v in vehicles if v.is_av and v.alive]
    r_i = sum(intention_reward(v, cfg) for v in avs) / len(avs) if avs else 0.0
    r_as = average_speed_reward(avs, cfg)
    p_lc = float(events.lane_changes_by_avs)
    p_c = float(events.collisions)
    total = w.w1 * r_i + w.w2 * r_as + w.w3 * p_lc + w.w4 * p_c
    return RewardBreakdown(r_i, r_as, p_lc, p_c, total)


def figure_eight_reward(speeds: Sequence[float], v_desired: float) -> float:
    """``max(|Vd*1| - |Vd - V|, 0) / |Vd*1|`` over the speeds of all vehicles."""
    n = len(speeds)
    if n == 0:
        return 0.0
    ideal = v_desired * math.sqrt(n)
    dev = math.sqrt(sum((v_desired - s) ** 2 for s in speeds))
    return max(ideal - dev, 0.0) / ideal
