"""Intelligent Driver Model and the gap-acceptance lane-change rule for HVs."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import VehicleState


@dataclass(frozen=True)
class IdmParams:
    v0: float
    T: float = 1.0
    s0: float = 2.0
    a: float = 1.5
    b: float = 1.5
    delta: float = 4.0


def desired_gap(v: float, v_lead: float, p: IdmParams) -> float:
    dynamic = v * p.T + v * (v - v_lead) / (2.0 * math.sqrt(p.a * p.b))
    return p.s0 + max(0.0, dynamic)


def idm_acceleration(v: float, v_lead: float | None, gap_m: float | None, p: IdmParams,
                     a_min: float = -math.inf, a_max: float = math.inf) -> float:
    """IDM acceleration, clamped to ``[a_min, a_max]``.

    ``v_lead``/``gap_m`` of ``None`` means free road.  A non-positive gap to an
    existing leader is an imminent collision and returns ``a_min``.
    """
    acc = p.a * (1.0 - (v / p.v0) ** p.delta)
    if v_lead is not None:
        if gap_m is None or gap_m <= 0.0:
            return a_min
        acc -= p.a * (desired_gap(v, v_lead, p) / gap_m) ** 2
    return min(max(acc, a_min), a_max)


STAY, LEFT, RIGHT = "STAY", "LEFT", "RIGHT"


@dataclass
class LaneNeighbors:
    """Nearest leader and follower of a vehicle in one lane (``None`` when absent)."""
    leader: VehicleState | None = None
    follower: VehicleState | None = None


def hv_lane_change_decision(vehicle: VehicleState, neighbors: dict[int, LaneNeighbors],
                            n_lanes: int, p: IdmParams, length_m: float,
                            hysteresis_m: float = 5.0) -> str:
    """Change toward the adjacent lane whose leader gap beats the current one.

    A lane qualifies when its leader gap exceeds the current-lane leader gap by
    ``hysteresis_m`` and the would-be follower keeps at least ``s0 + v_f * T``.
    Ties between left and right go right.
    """
    def leader_gap(lane: int) -> float:
        nb = neighbors.get(lane)
        if nb is None or nb.leader is None:
            return math.inf
        return nb.leader.pos_m - length_m - vehicle.pos_m

    def follower_ok(lane: int) -> bool:
        nb = neighbors.get(lane)
        if nb is None or nb.follower is None:
            return True
        f = nb.follower
        return vehicle.pos_m - length_m - f.pos_m >= p.s0 + f.speed_mps * p.T

    current = leader_gap(vehicle.lane)
    best, best_gap = STAY, -math.inf
    for direction, lane in ((RIGHT, vehicle.lane + 1), (LEFT, vehicle.lane - 1)):
        if not 0 <= lane < n_lanes:
            continue
        gap = leader_gap(lane)
        if gap == math.inf and current == math.inf:
            continue
        if gap > current + hysteresis_m and follower_ok(lane) and gap > best_gap:
            best, best_gap = direction, gap
    return best
