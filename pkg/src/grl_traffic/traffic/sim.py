"""Point-mass microscopic simulators for the highway-ramping and figure-eight scenarios."""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from .core import Intention, Kind, ScenarioConfig, SimEvents, VehicleState
from .idm import LEFT, RIGHT, IdmParams, LaneNeighbors, hv_lane_change_decision, idm_acceleration

MAIN, RAMP1, RAMP2 = "main", "ramp1", "ramp2"


class ContractError(ValueError):
    pass


def idm_params_for(cfg: ScenarioConfig, kind: Kind) -> IdmParams:
    i = cfg.idm
    return IdmParams(v0=cfg.v_max(kind), T=i.T, s0=i.s0, a=i.a, b=i.b, delta=i.delta)


def euler_advance(pos: float, speed: float, acc: float, dt: float, v_max: float) -> tuple[float, float]:
    """``pos += v*dt`` then ``v += a*dt``, speed clamped to ``[0, v_max]``."""
    return pos + speed * dt, min(max(speed + acc * dt, 0.0), v_max)


def detect_lane_collisions(vehicles: list[VehicleState], length_m: float) -> list[tuple[int, int]]:
    """Same-lane consecutive pairs whose bumper gap is <= 0 (each pair once)."""
    pairs = []
    by_lane: dict[int, list[VehicleState]] = {}
    for v in vehicles:
        by_lane.setdefault(v.lane, []).append(v)
    for lane_vs in by_lane.values():
        lane_vs.sort(key=lambda v: (v.pos_m, v.id))
        for follower, leader in zip(lane_vs[:-1], lane_vs[1:]):
            if leader.pos_m - length_m - follower.pos_m <= 0.0:
                pairs.append((follower.id, leader.id))
    return pairs


def spawn_inflow(vehicles: list[VehicleState], cfg: ScenarioConfig, rng: np.random.Generator,
                 next_id: int, next_av_kind: Kind) -> tuple[list[VehicleState], Kind]:
    """Bernoulli arrivals at ``x = 0`` for HVs then AVs.

    Each class draws with probability ``inflow * dt``; an arrival is dropped
    when the class is at capacity or no lane has a clear spawn gap.  AV routes
    alternate between ramp 1 and ramp 2.
    """
    if not cfg.is_highway:
        raise ContractError("spawn_inflow applies to the highway scenario only")
    spawned: list[VehicleState] = []
    everyone = list(vehicles)
    n_hv = sum(1 for v in vehicles if v.kind is Kind.HV)
    n_av = len(vehicles) - n_hv
    safe = cfg.idm.s0 + cfg.spawn_speed_mps * cfg.idm.T + cfg.vehicle_length_m
    for is_av, rate, alive, cap in ((False, cfg.inflow_hv_vps, n_hv, cfg.m),
                                    (True, cfg.inflow_av_vps, n_av, cfg.n)):
        # draw unconditionally so stream consumption is state-independent
        arrive = rng.random() < rate * cfg.dt_s
        lanes = rng.permutation(cfg.n_lanes)
        if not arrive or alive >= cap:
            continue
        for lane in lanes:
            lane = int(lane)
            if all(v.lane != lane or v.pos_m >= safe for v in everyone):
                kind = next_av_kind if is_av else Kind.HV
                veh = VehicleState(next_id, kind, lane, 0.0,
                                   min(cfg.spawn_speed_mps, cfg.v_max(kind)))
                next_id += 1
                if is_av:
                    next_av_kind = Kind.AV_RAMP2 if kind is Kind.AV_RAMP1 else Kind.AV_RAMP1
                spawned.append(veh)
                everyone.append(veh)
                break
    return spawned, next_av_kind


def route_intention(v: VehicleState, cfg: ScenarioConfig) -> Intention:
    """Lateral direction an AV needs to reach its exit lane."""
    right = cfg.n_lanes - 1
    if v.kind is Kind.AV_RAMP1 or (v.kind is Kind.AV_RAMP2 and v.pos_m >= cfg.ramp1_pos_m):
        return Intention.STRAIGHT if v.lane == right else Intention.RIGHT
    if v.kind is Kind.AV_RAMP2:
        return Intention.LEFT if v.lane == right and cfg.n_lanes > 1 else Intention.STRAIGHT
    return Intention.STRAIGHT


class Simulator:
    """Owns the alive vehicle set of one episode."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.vehicles: dict[int, VehicleState] = {}
        self.step_count = 0
        self._next_id = 0
        self._idm = {k: idm_params_for(cfg, k) for k in Kind}

    @property
    def alive(self) -> list[VehicleState]:
        return list(self.vehicles.values())

    def avs(self) -> list[VehicleState]:
        return [v for v in self.vehicles.values() if v.is_av]

    def _check_actions(self, av_actions: Mapping[int, float]) -> None:
        for vid in av_actions:
            v = self.vehicles.get(vid)
            if v is None or not v.is_av:
                raise ContractError(f"action for dead or unknown AV id {vid}")

    def snapshot(self) -> list[tuple]:
        return [(v.id, v.kind.value, v.lane, v.pos_m, v.speed_mps, int(v.intention))
                for v in sorted(self.vehicles.values(), key=lambda v: v.id)]


class HighwaySim(Simulator):
    """Three-lane highway with two right-side exit ramps and open inflow."""

    def __init__(self, cfg: ScenarioConfig, rng: np.random.Generator):
        super().__init__(cfg)
        self.rng = rng
        self._next_av_kind = Kind.AV_RAMP1

    def reset(self) -> None:
        self.vehicles.clear()
        self.step_count = 0
        self._next_av_kind = Kind.AV_RAMP1

    def add(self, v: VehicleState) -> VehicleState:
        self.vehicles[v.id] = v
        self._next_id = max(self._next_id, v.id + 1)
        return v

    def _neighbors(self, ego: VehicleState) -> dict[int, LaneNeighbors]:
        out: dict[int, LaneNeighbors] = {}
        for lane in (ego.lane - 1, ego.lane, ego.lane + 1):
            nb = LaneNeighbors()
            for v in self.vehicles.values():
                if v.id == ego.id or v.lane != lane:
                    continue
                ahead = (v.pos_m, v.id) > (ego.pos_m, ego.id)
                if ahead and (nb.leader is None or v.pos_m < nb.leader.pos_m):
                    nb.leader = v
                if not ahead and (nb.follower is None or v.pos_m > nb.follower.pos_m):
                    nb.follower = v
            out[lane] = nb
        return out

    def step(self, av_actions: Mapping[int, int] | None = None) -> SimEvents:
        """Advance one physics step.

        ``av_actions`` maps AV id to a lane command (0 left, 1 straight,
        2 right); it is only consulted on decision steps.
        """
        cfg = self.cfg
        av_actions = av_actions or {}
        self._check_actions(av_actions)
        ev = SimEvents()
        decision = self.step_count % cfg.decision_period_steps == 0

        if decision:
            for vid in sorted(av_actions):
                v = self.vehicles[vid]
                target = v.lane + int(av_actions[vid]) - 1
                if target != v.lane and 0 <= target < cfg.n_lanes:
                    v.lane = target
                    ev.lane_changes_by_avs += 1
            for v in sorted(self.vehicles.values(), key=lambda v: v.id):
                if v.kind is not Kind.HV:
                    continue
                choice = hv_lane_change_decision(v, self._neighbors(v), cfg.n_lanes,
                                                 self._idm[v.kind], cfg.vehicle_length_m,
                                                 cfg.lc_hysteresis_m)
                if choice == LEFT:
                    v.lane -= 1
                    v.intention = Intention.LEFT
                elif choice == RIGHT:
                    v.lane += 1
                    v.intention = Intention.RIGHT
                else:
                    v.intention = Intention.STRAIGHT

        # longitudinal control, computed from one consistent snapshot
        accs: dict[int, float] = {}
        by_lane: dict[int, list[VehicleState]] = {}
        for v in self.vehicles.values():
            by_lane.setdefault(v.lane, []).append(v)
        for lane_vs in by_lane.values():
            lane_vs.sort(key=lambda v: (v.pos_m, v.id))
            for i, v in enumerate(lane_vs):
                lead = lane_vs[i + 1] if i + 1 < len(lane_vs) else None
                p = self._idm[v.kind]
                if lead is None:
                    accs[v.id] = idm_acceleration(v.speed_mps, None, None, p, cfg.a_min, cfg.a_max)
                else:
                    gap = lead.pos_m - cfg.vehicle_length_m - v.pos_m
                    accs[v.id] = idm_acceleration(v.speed_mps, lead.speed_mps, gap, p,
                                                  cfg.a_min, cfg.a_max)

        right = cfg.n_lanes - 1
        for v in list(self.vehicles.values()):
            prev = v.pos_m
            v.pos_m, v.speed_mps = euler_advance(v.pos_m, v.speed_mps, accs[v.id], cfg.dt_s,
                                                 cfg.v_max(v.kind))
            where = None
            if v.lane == right and v.kind is Kind.AV_RAMP1 and prev < cfg.ramp1_pos_m <= v.pos_m:
                where = RAMP1
            elif v.lane == right and v.kind is Kind.AV_RAMP2 and prev < cfg.ramp2_pos_m <= v.pos_m:
                where = RAMP2
            elif v.pos_m >= cfg.highway_length_m:
                where = MAIN
            if where is not None:
                v.alive = False
                del self.vehicles[v.id]
                ev.exits.append((v.id, where))
                if where != MAIN:
                    ev.ramp_exits += 1

        spawned, self._next_av_kind = spawn_inflow(self.alive, cfg, self.rng, self._next_id,
                                                   self._next_av_kind)
        for v in spawned:
            self.add(v)
            ev.spawns.append(v.id)

        self._resolve_collisions(ev)
        for v in self.vehicles.values():
            if v.is_av:
                v.intention = route_intention(v, cfg)
        self.step_count += 1
        return ev

    def _resolve_collisions(self, ev: SimEvents) -> None:
        pairs = detect_lane_collisions(self.alive, self.cfg.vehicle_length_m)
        for a, b in pairs:
            ev.collisions += 1
            ev.collided.append((a, b))
        for a, b in pairs:
            for vid in (a, b):
                v = self.vehicles.pop(vid, None)
                if v is not None:
                    v.alive = False


class FigureEightSim(Simulator):
    """Closed single-lane loop crossing itself at one conflict point.

    Positions are loop coordinates in ``[0, loop_length)``.  The loop is
    straight A (crossing at its midpoint), ring-1 arc, straight B (crossing at
    its midpoint), ring-2 arc, so the two passes through the crossing sit half
    a loop apart.
    """

    def __init__(self, cfg: ScenarioConfig, rng: np.random.Generator):
        super().__init__(cfg)
        self.rng = rng
        self.length = cfg.loop_length_m
        self.crossings = cfg.crossing_points_m
        half = 0.5 * cfg.conflict_zone_m
        self.zones = [(c - half, c + half) for c in self.crossings]
        self.virtual_leaders: dict[int, int] = {}

    def reset(self) -> None:
        cfg = self.cfg
        self.vehicles.clear()
        self.step_count = 0
        total = cfg.m + cfg.n
        spacing = self.length / total
        # rear bumpers clear of the first zone even at maximum jitter
        offset = (self.crossings[0] + 0.5 * cfg.conflict_zone_m + cfg.vehicle_length_m
                  + cfg.start_jitter_m + 1.0)
        kinds = []
        hv_left, av_left = cfg.m, cfg.n
        for i in range(total):
            take_av = av_left > 0 and (i % 2 == 1 or hv_left == 0)
            if take_av:
                kinds.append(Kind.AV_GENERIC)
                av_left -= 1
            else:
                kinds.append(Kind.HV)
                hv_left -= 1
        jitter = self.rng.uniform(-cfg.start_jitter_m, cfg.start_jitter_m, size=total)
        hv_ids = iter(range(cfg.m))
        av_ids = iter(range(cfg.m, total))
        for i, kind in enumerate(kinds):
            vid = next(av_ids) if kind.is_av else next(hv_ids)
            pos = (offset + i * spacing + jitter[i]) % self.length
            self.vehicles[vid] = VehicleState(vid, kind, 0, pos, 0.0)
        self._next_id = total

    # -- geometry

    def loop_gap(self, follower: VehicleState, leader: VehicleState) -> float:
        return (leader.pos_m - follower.pos_m) % self.length - self.cfg.vehicle_length_m

    def signed_offset(self, pos: float) -> float:
        """Signed loop distance from the first crossing point, in ``[-L/2, L/2)``."""
        L = self.length
        return (pos - self.crossings[0] + 0.5 * L) % L - 0.5 * L

    def zone_of(self, pos: float) -> int | None:
        """Index of the conflict zone the vehicle body overlaps, if any."""
        for k, (z0, z1) in enumerate(self.zones):
            ahead = (pos - z0) % self.length
            if ahead <= (z1 - z0) + self.cfg.vehicle_length_m:
                return k
        return None

    def distance_to_zone(self, pos: float) -> tuple[int, float]:
        """Next zone ahead (by entry point) and the front-bumper distance to its entry."""
        best = None
        for k, (z0, _) in enumerate(self.zones):
            d = (z0 - pos) % self.length
            if best is None or d < best[1]:
                best = (k, d)
        return best

    def sensing_distance(self, a: VehicleState, b: VehicleState) -> float:
        """Loop distance, shortened through the crossing for vehicles on opposite passes."""
        L = self.length
        d = abs(a.pos_m - b.pos_m) % L
        d = min(d, L - d)
        c1, c2 = self.crossings

        def to(p, c):
            x = abs(p - c) % L
            return min(x, L - x)

        via = min(to(a.pos_m, c1) + to(b.pos_m, c2), to(a.pos_m, c2) + to(b.pos_m, c1))
        return min(d, via)

    # -- control

    def right_of_way(self) -> dict[int, int]:
        """Assign virtual stopped leaders to HVs that must yield at the crossing.

        Returns HV id -> index of the zone whose entry acts as the leader.  A
        vehicle approaching one pass yields to any vehicle on the other pass
        that reaches its zone earlier; vehicles already inside a zone or
        unable to stop before it keep their priority.
        """
        cfg = self.cfg
        brake = abs(cfg.a_min)
        cand = []
        for v in self.vehicles.values():
            inside = self.zone_of(v.pos_m)
            if inside is not None:
                cand.append((v, inside, 0.0, True))
                continue
            k, d = self.distance_to_zone(v.pos_m)
            stop_dist = v.speed_mps ** 2 / (2.0 * brake)
            if d <= stop_dist + cfg.approach_margin_m + v.speed_mps * cfg.dt_s:
                eta = d / max(v.speed_mps, 1e-3)
                committed = d < stop_dist
                cand.append((v, k, eta, committed))
        leaders: dict[int, int] = {}
        for v, k, eta, committed in cand:
            if v.kind is not Kind.HV or committed:
                continue
            for w, kw, eta_w, committed_w in cand:
                if kw == k or w.id == v.id:
                    continue
                if committed_w or (eta_w, w.id) < (eta, v.id):
                    leaders[v.id] = k
                    break
        return leaders

    def step(self, av_actions: Mapping[int, float] | None = None) -> SimEvents:
        """Advance one physics step; ``av_actions`` maps AV id to acceleration."""
        cfg = self.cfg
        av_actions = av_actions or {}
        self._check_actions(av_actions)
        ev = SimEvents()
        self.virtual_leaders = self.right_of_way()

        order = sorted(self.vehicles.values(), key=lambda v: (v.pos_m, v.id))
        accs: dict[int, float] = {}
        for i, v in enumerate(order):
            if v.is_av:
                accs[v.id] = min(max(float(av_actions.get(v.id, 0.0)), cfg.a_min), cfg.a_max)
                continue
            p = self._idm[v.kind]
            if len(order) > 1:
                lead = order[(i + 1) % len(order)]
                acc = idm_acceleration(v.speed_mps, lead.speed_mps, self.loop_gap(v, lead), p,
                                       cfg.a_min, cfg.a_max)
            else:
                acc = idm_acceleration(v.speed_mps, None, None, p, cfg.a_min, cfg.a_max)
            if v.id in self.virtual_leaders:
                z0 = self.zones[self.virtual_leaders[v.id]][0]
                gap = (z0 - v.pos_m) % self.length
                acc = min(acc, idm_acceleration(v.speed_mps, 0.0, gap, p, cfg.a_min, cfg.a_max))
            accs[v.id] = acc

        prev = {v.id: (v.pos_m, v.speed_mps) for v in self.vehicles.values()}
        for v in self.vehicles.values():
            pos, v.speed_mps = euler_advance(v.pos_m, v.speed_mps, accs[v.id], cfg.dt_s,
                                             cfg.v_max(v.kind))
            v.pos_m = pos % self.length

        pairs = self.detect_collisions(prev)
        ev.collisions = len(pairs)
        ev.collided = pairs
        self.step_count += 1
        return ev

    def detect_collisions(self, prev: Mapping[int, tuple[float, float]] | None = None
                          ) -> list[tuple[int, int]]:
        """Rear-end overlaps on the loop plus conflict-zone overlaps across passes.

        With ``prev`` (id -> position, speed at step start) zone occupancy is
        swept over the step as time intervals; otherwise it is instantaneous.
        """
        cfg = self.cfg
        vs = sorted(self.vehicles.values(), key=lambda v: (v.pos_m, v.id))
        found: set[tuple[int, int]] = set()
        if len(vs) > 1:
            for i, v in enumerate(vs):
                lead = vs[(i + 1) % len(vs)]
                if lead.id != v.id and self.loop_gap(v, lead) <= 0.0:
                    found.add(tuple(sorted((v.id, lead.id))))

        occ: dict[int, list[tuple[int, float, float]]] = {0: [], 1: []}
        for v in vs:
            if prev is None:
                k = self.zone_of(v.pos_m)
                if k is not None:
                    occ[k].append((v.id, 0.0, 0.0))
            else:
                p0, s0 = prev[v.id]
                for k, t0, t1 in self._sweep(p0, s0 * cfg.dt_s):
                    occ[k].append((v.id, t0, t1))
        for a, ta0, ta1 in occ[0]:
            for b, tb0, tb1 in occ[1]:
                if max(ta0, tb0) <= min(ta1, tb1):
                    found.add(tuple(sorted((a, b))))
        return sorted(found)

    def _sweep(self, p0: float, travel: float) -> list[tuple[int, float, float]]:
        """Fractions of the step during which the body overlaps each zone."""
        out = []
        length = self.cfg.vehicle_length_m
        for k, (z0, z1) in enumerate(self.zones):
            # front enters at z0, rear leaves at z1 + length; zone shifted so it lies ahead of p0
            start = (z0 - p0) % self.length
            end = start + (z1 - z0) + length
            if start + (z1 - z0) + length > self.length:
                start -= self.length
                end -= self.length
            # front-relative window [start, end], front travels [0, travel]
            if travel <= 0.0:
                if start <= 0.0 <= end:
                    out.append((k, 0.0, 1.0))
                continue
            lo = max(start, 0.0)
            hi = min(end, travel)
            if lo <= hi:
                out.append((k, lo / travel, hi / travel))
        return out
