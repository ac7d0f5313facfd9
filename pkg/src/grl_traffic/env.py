"""Decision-level environment: simulator + slot bookkeeping + graph observation + reward."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algorithms.base import EnvSpec
from .graph import (FIGURE_EIGHT_FEATURES, HIGHWAY_FEATURES, GraphObservation, SensingModel,
                    SlotAssigner, build_adjacency, build_index, build_node_features, mask_actions)
from .reward import RewardWeights, figure_eight_reward, highway_reward
from .traffic.core import ScenarioConfig, SimEvents
from .traffic.sim import FigureEightSim, HighwaySim


@dataclass
class EpisodeMetrics:
    reward: float = 0.0
    collisions: int = 0
    lane_changes: int = 0
    exits: int = 0
    av_spawned: int = 0
    speed_sum: float = 0.0
    speed_count: int = 0
    decisions: int = 0

    @property
    def mean_speed(self) -> float:
        return self.speed_sum / self.speed_count if self.speed_count else 0.0

    @property
    def ramp_exit_rate(self) -> float:
        return self.exits / self.av_spawned if self.av_spawned else 0.0


@dataclass
class StepInfo:
    events: SimEvents
    physics_steps: int
    truncated: bool
    trace: list = field(default_factory=list)


class TrafficEnv:
    """One decision advances ``decision_period_steps`` physics steps.

    The transition reward is the sum of the per-physics-step rewards in the
    period. ``done`` is true only on termination (a figure-eight collision);
    reaching the horizon is a truncation reported in ``info``.
    """

    def __init__(self, cfg: ScenarioConfig, weights: RewardWeights | None = None,
                 rng: np.random.Generator | None = None, trace: bool = False):
        self.cfg = cfg
        self.weights = weights or RewardWeights()
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.trace = trace
        sim_cls = HighwaySim if cfg.is_highway else FigureEightSim
        self.sim = sim_cls(cfg, self.rng)
        self.slots = SlotAssigner(cfg.m, cfg.n)
        self.sensing = SensingModel(cfg.sensing_range_m)
        self.av_slots = range(cfg.m, cfg.m + cfg.n)
        self.metrics = EpisodeMetrics()
        self.obs: GraphObservation | None = None
        self._seen_avs: set[int] = set()

    @property
    def spec(self) -> EnvSpec:
        c = self.cfg
        agent_slots = np.r_[np.zeros(c.m), np.ones(c.n)]
        return EnvSpec(c.n_slots, HIGHWAY_FEATURES if c.is_highway else FIGURE_EIGHT_FEATURES,
                       discrete=c.is_highway, n_actions=3, a_min=c.a_min, a_max=c.a_max,
                       agent_slots=agent_slots)

    @property
    def max_decisions(self) -> int:
        c = self.cfg
        return -(-c.horizon_steps // c.decision_period_steps)

    def reset(self) -> GraphObservation:
        self.sim.reset()
        self.slots.reset()
        self.metrics = EpisodeMetrics()
        self._seen_avs = {v.id for v in self.sim.avs()}
        self.obs = self.observe()
        return self.obs

    def observe(self) -> GraphObservation:
        cfg = self.cfg
        vehicles = self.sim.alive
        slot_of = self.slots.sync(vehicles)
        if cfg.is_highway:
            feats = build_node_features(vehicles, slot_of, cfg)
            adj = build_adjacency(vehicles, slot_of, cfg.n_slots, self.sensing)
            index = build_index(vehicles, slot_of, cfg.n_slots)
        else:
            feats = build_node_features(vehicles, slot_of, cfg, self.sim.signed_offset)
            adj = build_adjacency(vehicles, slot_of, cfg.n_slots, self.sensing,
                                  self.sim.sensing_distance)
            index = None
        return GraphObservation(feats, adj, index, {s: vid for vid, s in slot_of.items()})

    def vehicle_actions(self, actions) -> dict:
        obs = self.obs
        raw = mask_actions(actions, obs.mask, obs.slot_to_vehicle, self.av_slots)
        if self.cfg.is_highway:
            return {vid: int(a) for vid, a in raw.items()}
        return {vid: float(a) for vid, a in raw.items()}

    def _physics_reward(self, events: SimEvents) -> float:
        if self.cfg.is_highway:
            return highway_reward(self.sim.alive, events, self.weights, self.cfg).total
        return figure_eight_reward([v.speed_mps for v in self.sim.alive], self.weights.v_desired_mps)

    def _trace_records(self, ev: SimEvents, commands: dict) -> list[dict]:
        events = {"collisions": ev.collisions, "lane_changes": ev.lane_changes_by_avs,
                  "exits": [list(e) for e in ev.exits], "spawns": list(ev.spawns)}
        return [{"step": self.sim.step_count, "id": v.id, "kind": v.kind.value, "lane": v.lane,
                 "pos_m": v.pos_m, "speed_mps": v.speed_mps, "action": commands.get(v.id),
                 "events": events}
                for v in sorted(self.sim.alive, key=lambda v: v.id)]

    def step(self, actions):
        """Apply per-slot ``actions``; returns ``(obs, reward, done, info)``."""
        if self.obs is None:
            raise RuntimeError("step() before reset()")
        cfg, m = self.cfg, self.metrics
        commands = self.vehicle_actions(actions)
        total = SimEvents()
        reward, done, n = 0.0, False, 0
        trace = []
        for _ in range(cfg.decision_period_steps):
            if self.sim.step_count >= cfg.horizon_steps:
                break
            alive = self.sim.vehicles
            ev = self.sim.step({vid: a for vid, a in commands.items() if vid in alive})
            n += 1
            total.merge(ev)
            reward += self._physics_reward(ev)
            for v in self.sim.avs():
                self._seen_avs.add(v.id)
                m.speed_sum += v.speed_mps
                m.speed_count += 1
            if self.trace:
                trace.extend(self._trace_records(ev, commands))
            if not cfg.is_highway and ev.collisions:
                done = True
                break
        m.reward += reward
        m.collisions += total.collisions
        m.lane_changes += total.lane_changes_by_avs
        m.exits += total.ramp_exits
        m.av_spawned = len(self._seen_avs)
        m.decisions += 1
        self.obs = self.observe()
        truncated = not done and self.sim.step_count >= cfg.horizon_steps
        return self.obs, reward, done, StepInfo(total, n, truncated, trace)
