import math

import numpy as np
import pytest

from grl_traffic.traffic.core import KMH, Intention, Kind, ScenarioConfig, VehicleState
from grl_traffic.traffic.idm import (LEFT, RIGHT, STAY, IdmParams, LaneNeighbors,
                                     hv_lane_change_decision, idm_acceleration)
from grl_traffic.traffic.sim import (MAIN, RAMP1, ContractError, FigureEightSim, HighwaySim,
                                     detect_lane_collisions, spawn_inflow)


def hw(**kw):
    return ScenarioConfig(scenario="highway_ramping", **kw)


def f8(**kw):
    return ScenarioConfig(scenario="figure_eight", **kw)


P = IdmParams(v0=16.67, T=1.0, s0=2.0, a=1.5, b=1.5, delta=4.0)


# -- IDM

def test_idm_free_flow_equilibrium():
    assert abs(idm_acceleration(P.v0, None, None, P)) < 1e-9


def test_idm_standstill_free_road():
    assert idm_acceleration(0.0, None, None, P, -3, 3) == pytest.approx(1.5)


def test_idm_matches_direct_formula():
    v, vl, gap = 10.0, 10.0, 30.0
    s_star = 2.0 + v * 1.0 + v * (v - vl) / (2 * math.sqrt(1.5 * 1.5))
    expected = 1.5 * (1 - (v / 16.67) ** 4 - (s_star / gap) ** 2)
    assert abs(idm_acceleration(v, vl, gap, P) - expected) < 1e-12


def test_idm_nonpositive_gap_returns_a_min():
    assert idm_acceleration(5.0, 5.0, 0.0, P, -3.0, 3.0) == -3.0
    assert idm_acceleration(5.0, 5.0, -1.0, P, -3.0, 3.0) == -3.0


def test_idm_output_clamped():
    assert idm_acceleration(15.0, 0.0, 0.5, P, -3.0, 3.0) == -3.0


# -- lane change heuristic

def _hv(lane, pos, speed=10.0, vid=0):
    return VehicleState(vid, Kind.HV, lane, pos, speed)


def test_lane_change_no_neighbors_stays():
    ego = _hv(1, 50)
    assert hv_lane_change_decision(ego, {0: LaneNeighbors(), 1: LaneNeighbors(), 2: LaneNeighbors()},
                                   3, P, 5.0) == STAY


def test_lane_change_toward_empty_lane():
    ego = _hv(0, 50)
    nbs = {0: LaneNeighbors(leader=_hv(0, 60, vid=1)), 1: LaneNeighbors()}
    assert hv_lane_change_decision(ego, nbs, 3, P, 5.0) == RIGHT
    ego = _hv(2, 50)
    nbs = {2: LaneNeighbors(leader=_hv(2, 60, vid=1)), 1: LaneNeighbors()}
    assert hv_lane_change_decision(ego, nbs, 3, P, 5.0) == LEFT


def test_lane_change_safety_veto():
    ego = _hv(0, 50)
    nbs = {0: LaneNeighbors(leader=_hv(0, 60, vid=1)),
           1: LaneNeighbors(follower=_hv(1, 44, speed=10.0, vid=2))}
    assert hv_lane_change_decision(ego, nbs, 3, P, 5.0) == STAY


def test_lane_change_never_leaves_road():
    ego = _hv(0, 50)
    nbs = {0: LaneNeighbors(leader=_hv(0, 60, vid=1))}
    assert hv_lane_change_decision(ego, nbs, 1, P, 5.0) == STAY


# -- highway stepping

def test_empty_road_without_inflow():
    sim = HighwaySim(hw(inflow_hv_vps=0, inflow_av_vps=0), np.random.default_rng(0))
    ev = sim.step()
    assert sim.alive == [] and ev.collisions == 0 and ev.lane_changes_by_avs == 0
    assert ev.exits == [] and ev.spawns == []


def test_single_av_euler_step():
    cfg = hw(inflow_hv_vps=0, inflow_av_vps=0)
    sim = HighwaySim(cfg, np.random.default_rng(0))
    sim.add(VehicleState(0, Kind.AV_RAMP2, 1, 10.0, 20.0))
    sim.step({0: 1})
    v = sim.vehicles[0]
    acc = idm_acceleration(20.0, None, None, IdmParams(v0=75 * KMH), -3, 3)
    assert v.pos_m == pytest.approx(20.0)
    assert v.speed_mps == pytest.approx(20.0 + 0.5 * acc)


def test_ramp1_exit_on_rightmost_lane():
    cfg = hw(inflow_hv_vps=0, inflow_av_vps=0)
    sim = HighwaySim(cfg, np.random.default_rng(0))
    sim.add(VehicleState(0, Kind.AV_RAMP1, 2, 78.0, 10.0))
    ev = sim.step({0: 1})
    assert (0, RAMP1) in ev.exits and ev.ramp_exits == 1 and 0 not in sim.vehicles


def test_ramp1_av_in_wrong_lane_continues_to_main_end():
    cfg = hw(inflow_hv_vps=0, inflow_av_vps=0)
    sim = HighwaySim(cfg, np.random.default_rng(0))
    sim.add(VehicleState(0, Kind.AV_RAMP1, 1, 78.0, 10.0))
    ev = sim.step({0: 1})
    assert ev.exits == [] and 0 in sim.vehicles
    sim.vehicles[0].pos_m = 199.0
    ev = sim.step({0: 1})
    assert ev.exits == [(0, MAIN)] and ev.ramp_exits == 0


def test_av_lane_commands_and_counting():
    cfg = hw(inflow_hv_vps=0, inflow_av_vps=0)
    sim = HighwaySim(cfg, np.random.default_rng(0))
    sim.add(VehicleState(0, Kind.AV_RAMP1, 1, 10.0, 10.0))
    ev = sim.step({0: 2})
    assert sim.vehicles[0].lane == 2 and ev.lane_changes_by_avs == 1
    ev = sim.step({0: 0})  # not a decision step
    assert sim.vehicles[0].lane == 2 and ev.lane_changes_by_avs == 0
    ev = sim.step({0: 2})  # off-road command is a no-op
    assert sim.vehicles[0].lane == 2 and ev.lane_changes_by_avs == 0


def test_action_for_unknown_vehicle_rejected():
    sim = HighwaySim(hw(), np.random.default_rng(0))
    with pytest.raises(ContractError):
        sim.step({42: 1})


def test_intention_tracks_route():
    cfg = hw(inflow_hv_vps=0, inflow_av_vps=0)
    sim = HighwaySim(cfg, np.random.default_rng(0))
    sim.add(VehicleState(0, Kind.AV_RAMP1, 0, 10.0, 10.0))
    sim.add(VehicleState(1, Kind.AV_RAMP2, 2, 40.0, 10.0))
    sim.step({0: 1, 1: 1})
    assert sim.vehicles[0].intention is Intention.RIGHT
    assert sim.vehicles[1].intention is Intention.LEFT


def test_collision_detection_gap_arithmetic():
    a = VehicleState(0, Kind.HV, 0, 50.0, 0.0)
    b = VehicleState(1, Kind.HV, 0, 54.0, 0.0)
    assert detect_lane_collisions([a, b], 5.0) == [(0, 1)]
    b.pos_m = 58.0
    assert detect_lane_collisions([a, b], 5.0) == []


def test_collided_pair_removed_and_counted():
    cfg = hw(inflow_hv_vps=0, inflow_av_vps=0)
    sim = HighwaySim(cfg, np.random.default_rng(0))
    sim.add(VehicleState(0, Kind.AV_RAMP1, 1, 50.0, 10.0))
    sim.add(VehicleState(1, Kind.HV, 2, 52.0, 10.0))
    ev = sim.step({0: 2})  # AV cuts into the HV
    assert ev.collisions == 1 and sim.alive == []


def test_spawn_respects_capacity():
    cfg = hw(inflow_hv_vps=2.0, inflow_av_vps=0.0)
    full = [VehicleState(i, Kind.HV, i % 3, 50.0 + 20 * i, 10.0) for i in range(6)]
    for seed in range(50):
        spawned, _ = spawn_inflow(full, cfg, np.random.default_rng(seed), 100, Kind.AV_RAMP1)
        assert spawned == []


def test_spawn_zero_inflow_never_spawns():
    cfg = hw(inflow_hv_vps=0.0, inflow_av_vps=0.0)
    rng = np.random.default_rng(0)
    assert all(spawn_inflow([], cfg, rng, 0, Kind.AV_RAMP1)[0] == [] for _ in range(1000))


def test_spawn_rate_matches_binomial_expectation():
    cfg = hw(inflow_hv_vps=0.5, inflow_av_vps=0.0, m=10**6)
    rng = np.random.default_rng(7)
    count = sum(len(spawn_inflow([], cfg, rng, 0, Kind.AV_RAMP1)[0]) for _ in range(10_000))
    assert abs(count / 10_000 - 0.25) / 0.25 < 0.05


def test_av_routes_alternate():
    cfg = hw(inflow_hv_vps=0.0, inflow_av_vps=2.0, n=10)
    rng = np.random.default_rng(0)
    kinds, kind = [], Kind.AV_RAMP1
    for _ in range(40):
        sp, kind = spawn_inflow([], cfg, rng, 0, kind)
        kinds += [v.kind for v in sp]
    assert kinds[:4] == [Kind.AV_RAMP1, Kind.AV_RAMP2, Kind.AV_RAMP1, Kind.AV_RAMP2]


def test_highway_determinism():
    def run(seed):
        sim = HighwaySim(hw(), np.random.default_rng(seed))
        for _ in range(200):
            sim.step({v.id: 1 for v in sim.avs()})
        return sim.snapshot()
    assert run(3) == run(3)


def test_highway_conservation_and_caps():
    cfg = hw(inflow_hv_vps=1.0, inflow_av_vps=1.0)
    sim = HighwaySim(cfg, np.random.default_rng(1))
    rng = np.random.default_rng(2)
    for _ in range(500):
        before = set(sim.vehicles)
        ev = sim.step({v.id: int(rng.integers(3)) for v in sim.avs()})
        after = set(sim.vehicles)
        removed = {vid for vid, _ in ev.exits} | {i for pair in ev.collided for i in pair}
        assert after == (before | set(ev.spawns)) - removed
        assert sum(not v.is_av for v in sim.alive) <= cfg.m
        assert sum(v.is_av for v in sim.alive) <= cfg.n


# -- figure eight

def test_loop_geometry():
    cfg = f8()
    assert cfg.loop_length_m == pytest.approx(2 * (2 * math.pi * 30 * 0.75 + 2 * 30 * math.sqrt(2)))
    assert 451 < cfg.loop_length_m < 453
    c1, c2 = cfg.crossing_points_m
    assert c2 - c1 == pytest.approx(cfg.loop_length_m / 2)


def test_figure_eight_reset_layout():
    sim = FigureEightSim(f8(), np.random.default_rng(0))
    sim.reset()
    assert len(sim.alive) == 12
    assert sorted(v.id for v in sim.alive if v.is_av) == list(range(6, 12))
    assert all(v.speed_mps == 0.0 for v in sim.alive)
    assert sim.detect_collisions() == []


def test_figure_eight_reset_clear_of_zones_at_any_jitter():
    # seed 11 once put an HV rear bumper inside each zone, colliding before any control
    cfg = f8()
    for seed in range(200):
        sim = FigureEightSim(cfg, np.random.default_rng(seed))
        sim.reset()
        assert all(sim.zone_of(v.pos_m) is None for v in sim.alive)
        assert sim.step({v.id: 0.0 for v in sim.avs()}).collisions == 0


def _place(sim, *specs):
    sim.vehicles.clear()
    for vid, kind, pos, speed in specs:
        sim.vehicles[vid] = VehicleState(vid, kind, 0, pos % sim.length, speed)


def test_conflict_zone_occupancy_from_both_passes_collides():
    sim = FigureEightSim(f8(), np.random.default_rng(0))
    c1, c2 = sim.crossings
    _place(sim, (0, Kind.HV, c1, 0.0), (1, Kind.HV, c2, 0.0))
    assert sim.detect_collisions() == [(0, 1)]
    _place(sim, (0, Kind.HV, c1, 0.0), (1, Kind.HV, c2 + 40, 0.0))
    assert sim.detect_collisions() == []


def test_right_of_way_later_arrival_yields():
    sim = FigureEightSim(f8(), np.random.default_rng(0))
    z1 = sim.zones[0][0]
    z2 = sim.zones[1][0]
    _place(sim, (0, Kind.HV, z1 - 10, 10.0), (1, Kind.HV, z2 - 30, 10.0))
    assert sim.right_of_way() == {1: 1}


def test_right_of_way_single_or_same_pass():
    sim = FigureEightSim(f8(), np.random.default_rng(0))
    z1 = sim.zones[0][0]
    _place(sim, (0, Kind.HV, z1 - 10, 10.0))
    assert sim.right_of_way() == {}
    _place(sim, (0, Kind.HV, z1 - 10, 10.0), (1, Kind.HV, z1 - 30, 10.0))
    assert sim.right_of_way() == {}


def test_hv_traffic_with_parked_av_is_collision_free():
    """HVs obey IDM plus right-of-way; the single AV stays parked away from the crossing."""
    cfg = f8(m=11, n=1)
    sim = FigureEightSim(cfg, np.random.default_rng(0))
    sim.reset()
    av = sim.avs()[0].id
    for _ in range(2000):
        ev = sim.step({av: 0.0})
        assert ev.collisions == 0
        for v in sim.alive:
            assert 0 <= v.pos_m < sim.length and 0 <= v.speed_mps <= cfg.v_max(v.kind)
