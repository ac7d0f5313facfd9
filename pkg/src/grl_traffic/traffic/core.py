"""Shared simulator types: vehicles, scenario parameters, per-step events."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

KMH = 1.0 / 3.6

HIGHWAY = "highway_ramping"
FIGURE_EIGHT = "figure_eight"


class Kind(str, Enum):
    HV = "HV"
    AV_RAMP1 = "AV_RAMP1"
    AV_RAMP2 = "AV_RAMP2"
    AV_GENERIC = "AV_GENERIC"

    @property
    def is_av(self) -> bool:
        return self is not Kind.HV


class Intention(int, Enum):
    LEFT = 0
    STRAIGHT = 1
    RIGHT = 2


@dataclass(slots=True)
class VehicleState:
    id: int
    kind: Kind
    lane: int
    pos_m: float
    speed_mps: float
    intention: Intention = Intention.STRAIGHT
    alive: bool = True

    @property
    def is_av(self) -> bool:
        return self.kind is not Kind.HV


@dataclass
class SimEvents:
    collisions: int = 0
    lane_changes_by_avs: int = 0
    exits: list[tuple[int, str]] = field(default_factory=list)
    spawns: list[int] = field(default_factory=list)
    collided: list[tuple[int, int]] = field(default_factory=list)
    ramp_exits: int = 0

    def merge(self, other: "SimEvents") -> None:
        self.collisions += other.collisions
        self.lane_changes_by_avs += other.lane_changes_by_avs
        self.exits.extend(other.exits)
        self.spawns.extend(other.spawns)
        self.collided.extend(other.collided)
        self.ramp_exits += other.ramp_exits


class IdmConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    T: float = Field(1.0, gt=0)
    s0: float = Field(2.0, ge=0)
    a: float = Field(1.5, gt=0)
    b: float = Field(1.5, gt=0)
    delta: float = Field(4.0, gt=0)


_DEFAULTS = {
    HIGHWAY: dict(
        v_max_hv_mps=60 * KMH, v_max_av_mps=75 * KMH, a_min=-3.0, a_max=3.0,
        decision_period_steps=2,
    ),
    FIGURE_EIGHT: dict(
        v_max_hv_mps=100 * KMH, v_max_av_mps=100 * KMH, a_min=-3.0, a_max=3.0,
        decision_period_steps=1,
    ),
}


class ScenarioConfig(BaseModel):
    """Physical and traffic parameters of one scenario.

    Speed limits and accelerations default per scenario kind; every other
    field has one default shared by both scenarios.
    """

    model_config = ConfigDict(extra="forbid")

    scenario: Literal["highway_ramping", "figure_eight"] = HIGHWAY
    m: int = Field(6, ge=0)
    n: int = Field(6, ge=1)
    n_lanes: int = Field(3, ge=1)
    highway_length_m: float = Field(200.0, gt=0)
    ramp1_pos_m: float = Field(80.0, gt=0)
    ramp2_pos_m: float = Field(160.0, gt=0)
    ring_radius_m: float = Field(30.0, gt=0)
    v_max_hv_mps: float = Field(gt=0)
    v_max_av_mps: float = Field(gt=0)
    a_min: float
    a_max: float
    inflow_hv_vps: float = Field(0.5, ge=0)
    inflow_av_vps: float = Field(0.3, ge=0)
    dt_s: float = Field(0.5, gt=0)
    decision_period_steps: int = Field(ge=1)
    horizon_steps: int = Field(600, gt=0)
    sensing_range_m: float = Field(30.0, gt=0)
    vehicle_length_m: float = Field(5.0, gt=0)
    spawn_speed_mps: float = Field(10.0, ge=0)
    lc_hysteresis_m: float = Field(5.0, ge=0)
    conflict_zone_m: float = Field(10.0, gt=0)
    approach_margin_m: float = Field(20.0, ge=0)
    start_jitter_m: float = Field(2.0, ge=0)
    idm: IdmConfig = Field(default_factory=IdmConfig)

    @model_validator(mode="before")
    @classmethod
    def _scenario_defaults(cls, data):
        if isinstance(data, dict):
            kind = data.get("scenario", HIGHWAY)
            if kind in _DEFAULTS:
                data = {**_DEFAULTS[kind], **data}
        return data

    @model_validator(mode="after")
    def _check(self):
        if not (self.ramp1_pos_m < self.ramp2_pos_m < self.highway_length_m):
            raise ValueError("need ramp1_pos_m < ramp2_pos_m < highway_length_m")
        if not (self.a_min < 0 < self.a_max):
            raise ValueError("need a_min < 0 < a_max")
        return self

    @property
    def is_highway(self) -> bool:
        return self.scenario == HIGHWAY

    @property
    def n_slots(self) -> int:
        return self.m + self.n

    def v_max(self, kind: Kind) -> float:
        return self.v_max_hv_mps if kind is Kind.HV else self.v_max_av_mps

    @property
    def straight_m(self) -> float:
        return 2.0 * self.ring_radius_m * math.sqrt(2.0)

    @property
    def arc_m(self) -> float:
        return 2.0 * math.pi * self.ring_radius_m * 0.75

    @property
    def loop_length_m(self) -> float:
        return 2.0 * (self.arc_m + self.straight_m)

    @property
    def crossing_points_m(self) -> tuple[float, float]:
        c1 = 0.5 * self.straight_m
        return c1, c1 + 0.5 * self.loop_length_m
