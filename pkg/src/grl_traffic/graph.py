"""Graph observations: node features, adjacency, index vector and slot bookkeeping.

Slots are fixed per class: HVs occupy ``0..m-1`` and AVs ``m..m+n-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .traffic.core import ScenarioConfig, VehicleState

HIGHWAY_FEATURES = 8
FIGURE_EIGHT_FEATURES = 2


class SlotError(ValueError):
    pass


@dataclass
class GraphObservation:
    node_features: np.ndarray
    adjacency: np.ndarray
    index: np.ndarray | None = None
    slot_to_vehicle: dict[int, int] = field(default_factory=dict)
    # per-encoder propagation matrices; replayed observations are batched many times
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_slots(self) -> int:
        return self.node_features.shape[0]

    @property
    def closed_loop(self) -> bool:
        return self.index is None

    @property
    def mask(self) -> np.ndarray:
        """Occupancy vector; closed-loop observations carry no index and are fully occupied."""
        return np.ones(self.n_slots) if self.index is None else self.index


@dataclass(frozen=True)
class SensingModel:
    sensing_range_m: float = 30.0

    def __post_init__(self):
        if self.sensing_range_m <= 0:
            raise ValueError("sensing_range_m must be positive")


class SlotAssigner:
    """Stable vehicle -> slot map; new vehicles take the lowest free slot of their class."""

    def __init__(self, m: int, n: int):
        self.m, self.n = m, n
        self.slot_of: dict[int, int] = {}

    def reset(self) -> None:
        self.slot_of.clear()

    def sync(self, vehicles: Sequence[VehicleState]) -> dict[int, int]:
        alive = {v.id for v in vehicles}
        for vid in [vid for vid in self.slot_of if vid not in alive]:
            del self.slot_of[vid]
        used = set(self.slot_of.values())
        for v in sorted(vehicles, key=lambda v: v.id):
            if v.id in self.slot_of:
                continue
            lo, hi = (self.m, self.m + self.n) if v.is_av else (0, self.m)
            free = next((s for s in range(lo, hi) if s not in used), None)
            if free is None:
                cls = "AV" if v.is_av else "HV"
                raise SlotError(f"more alive {cls}s than {cls} slots (vehicle {v.id})")
            self.slot_of[v.id] = free
            used.add(free)
        return dict(self.slot_of)


def build_node_features(vehicles: Sequence[VehicleState], slot_of: Mapping[int, int],
                        cfg: ScenarioConfig, signed_offset: Callable[[float], float] | None = None
                        ) -> np.ndarray:
    """Per-slot feature rows; unoccupied slots stay zero.

    Highway: ``[v/v_max, x/L, lane one-hot(3), intention one-hot(3)]``.
    Figure-eight: ``[v/v_max, signed offset from the crossing / loop length]``.
    """
    if cfg.is_highway:
        out = np.zeros((cfg.n_slots, HIGHWAY_FEATURES))
        for v in vehicles:
            s = slot_of[v.id]
            speed = v.speed_mps / cfg.v_max(v.kind)
            x = v.pos_m / cfg.highway_length_m
            if not (0.0 <= speed <= 1.0 and 0.0 <= x <= 1.0):
                raise ValueError(f"normalized feature out of [0, 1] for vehicle {v.id}")
            out[s, 0] = speed
            out[s, 1] = x
            out[s, 2 + min(v.lane, 2)] = 1.0
            out[s, 5 + int(v.intention)] = 1.0
        return out
    out = np.zeros((cfg.n_slots, FIGURE_EIGHT_FEATURES))
    for v in vehicles:
        s = slot_of[v.id]
        speed = v.speed_mps / cfg.v_max(v.kind)
        if not 0.0 <= speed <= 1.0:
            raise ValueError(f"normalized feature out of [0, 1] for vehicle {v.id}")
        out[s, 0] = speed
        out[s, 1] = signed_offset(v.pos_m) / cfg.loop_length_m
    return out


def _abs_distance(a: VehicleState, b: VehicleState) -> float:
    return abs(a.pos_m - b.pos_m)


def build_adjacency(vehicles: Sequence[VehicleState], slot_of: Mapping[int, int], n_slots: int,
                    sensing: SensingModel,
                    distance: Callable[[VehicleState, VehicleState], float] = _abs_distance
                    ) -> np.ndarray:
    """Self-loops, AV-AV links and AV-HV links within sensing range."""
    adj = np.zeros((n_slots, n_slots))
    vs = list(vehicles)
    for i, a in enumerate(vs):
        sa = slot_of[a.id]
        adj[sa, sa] = 1.0
        for b in vs[i + 1:]:
            if not (a.is_av or b.is_av):
                continue
            if a.is_av and b.is_av or distance(a, b) <= sensing.sensing_range_m:
                sb = slot_of[b.id]
                adj[sa, sb] = adj[sb, sa] = 1.0
    return adj


def build_index(vehicles: Sequence[VehicleState], slot_of: Mapping[int, int], n_slots: int
                ) -> np.ndarray:
    index = np.zeros(n_slots)
    for v in vehicles:
        s = slot_of.get(v.id)
        if s is None or not 0 <= s < n_slots:
            raise SlotError(f"vehicle {v.id} has no valid slot")
        index[s] = 1.0
    return index


def mask_actions(raw_actions: Sequence, index: np.ndarray, slot_to_vehicle: Mapping[int, int],
                 av_slots: range | None = None) -> dict[int, object]:
    """Keep actions of occupied slots, keyed by vehicle id.

    ``av_slots`` restricts the output to the AV slot range.
    """
    out = {}
    for s, flag in enumerate(index):
        if flag != 1 or (av_slots is not None and s not in av_slots):
            continue
        vid = slot_to_vehicle.get(s)
        if vid is not None:
            out[vid] = raw_actions[s]
    return out


def normalized_adjacency(adj: np.ndarray) -> np.ndarray:
    """``D^-1/2 A D^-1/2`` with ``D^-1/2 = 0`` on zero-degree slots; batched over leading axes."""
    deg = adj.sum(axis=-1)
    with np.errstate(divide="ignore"):
        inv = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    return inv[..., :, None] * adj * inv[..., None, :]
