import json
from pathlib import Path

import pytest
import yaml

from grl_traffic.algorithms import ALGORITHMS, ConfigError
from grl_traffic.cli import main
from grl_traffic.config import dumps, loads, parse_config, to_mapping
from grl_traffic.harness import CSV_HEADER

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SMOKE = ["run.horizon=20", "run.epochs=2", "run.episodes_per_epoch=2", "run.seeds=[0]",
         "encoder.layers=[8,8]", "algorithm.head_width=8", "algorithm.learning_starts=10",
         "algorithm.batch_size=8", "algorithm.rollout_steps=16", "algorithm.minibatch_size=8"]


def test_empty_file_gives_documented_defaults(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    cfg = parse_config(p)
    s = cfg.scenario
    assert (s.scenario, s.m, s.n, s.n_lanes, s.highway_length_m, s.ramp1_pos_m, s.ramp2_pos_m) == \
        ("highway_ramping", 6, 6, 3, 200.0, 80.0, 160.0)
    assert s.v_max_hv_mps == pytest.approx(60 / 3.6) and s.v_max_av_mps == pytest.approx(75 / 3.6)
    assert (s.a_min, s.a_max, s.inflow_hv_vps, s.inflow_av_vps) == (-3.0, 3.0, 0.5, 0.3)
    assert (cfg.reward.w1, cfg.reward.w2, cfg.reward.w3, cfg.reward.w4) == (1.0, 1.0, -0.1, -10.0)
    a = cfg.algorithm
    assert (a.id, a.gamma, a.batch_size, a.replay_capacity, a.target_update_period) == ("dqn", 0.99, 64, 20_000, 200)
    assert (a.ppo_clip, a.gae_lambda, a.ppo_epochs, a.td3_policy_delay) == (0.2, 0.95, 4, 2)
    assert cfg.run.seeds == [0, 1, 2] and cfg.run.epochs == 150 and cfg.run.episodes_per_epoch == 10
    assert cfg.encoder.kind == "gcn" and cfg.encoder.layers == [32, 32]


def test_figure_eight_defaults():
    s = parse_config(None, ["scenario.scenario=figure_eight", "algorithm.id=ppo"]).scenario
    assert s.v_max_av_mps == pytest.approx(100 / 3.6) and s.ring_radius_m == 30.0


def test_round_trip_is_identity(tmp_path):
    cfg = parse_config(None, ["scenario.highway_length_m=200", "algorithm.lr=3e-4", "run.seeds=[4,5]"])
    again = loads(dumps(cfg))
    assert to_mapping(again) == to_mapping(cfg)
    assert again.scenario.highway_length_m == 200.0
    p = tmp_path / "c.yaml"
    p.write_text(dumps(cfg))
    assert to_mapping(parse_config(p)) == to_mapping(cfg)


@pytest.mark.parametrize("override,path", [
    ("reward.w1=abc", "reward.w1"),
    ("algorithm.gamma=0", "algorithm.gamma"),
    ("scenario.bogus=1", "scenario.bogus"),
    ("run.seeds=[1,1]", "run.seeds"),
    ("algorithm.id=ddpg", "algorithm.id"),
    ("reward.w4=5", "reward"),
])
def test_errors_name_key_path(override, path):
    with pytest.raises(ConfigError, match=path.replace(".", r"\.")):
        parse_config(None, [override])


def test_conflicting_horizon_keys_rejected():
    with pytest.raises(ConfigError, match=r"run\.horizon"):
        parse_config(None, ["run.horizon=100", "scenario.horizon_steps=200"])
    assert parse_config(None, ["run.horizon=100"]).horizon_steps == 100


def test_override_applied_after_file(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump({"algorithm": {"lr": 0.1}}))
    assert parse_config(p, ["algorithm.lr=0.5"]).algorithm.lr == 0.5


def test_malformed_and_missing_files(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1, 2")
    with pytest.raises(ConfigError):
        parse_config(bad)
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.yaml")


def test_shipped_configs_validate():
    for p in sorted(CONFIGS.glob("*.yaml")):
        parse_config(p)


# -- CLI

def test_list_algorithms(capsys):
    assert main(["list-algorithms"]) == 0
    assert capsys.readouterr().out.split() == list(ALGORITHMS)


def test_unknown_subcommand_exits_2(capsys):
    assert main(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err


def test_no_subcommand_exits_2():
    assert main([]) == 2


def test_validate_config(tmp_path, capsys):
    good = tmp_path / "good.yaml"
    good.write_text("algorithm:\n  id: double_dqn\n")
    assert main(["validate-config", str(good)]) == 0
    assert yaml.safe_load(capsys.readouterr().out)["algorithm"]["id"] == "double_dqn"
    bad = tmp_path / "bad.cfg"
    bad.write_text("scenario:\n  scenario: figure_eight\nalgorithm:\n  id: dqn\n")
    assert main(["validate-config", str(bad)]) == 2
    assert "algorithm.id" in capsys.readouterr().err
    assert main(["validate-config", str(good), "reward.w1=abc"]) == 2
    assert "reward.w1" in capsys.readouterr().err


def test_train_writes_run_layout(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["train", "-c", str(CONFIGS / "smoke.yaml"), *SMOKE, "run.trace=true",
                 "run.checkpoint_every=1", "--out", str(out)])
    assert code == 0
    d = out / "highway_ramping" / "dqn" / "gcn" / "seed0"
    names = {p.name for p in d.iterdir()}
    assert names == {"metrics.csv", "checkpoint", "checkpoint.epoch1", "checkpoint.epoch2",
                     "config.yaml", "trace.jsonl"}
    assert (d / "metrics.csv").read_text().splitlines()[0] == CSV_HEADER
    resolved = parse_config(d / "config.yaml")
    assert resolved.run.seeds == [0] and resolved.format_version == 1
    head = json.loads((d / "trace.jsonl").read_text().splitlines()[0])
    assert head["format_version"] == 1
    rec = json.loads((d / "trace.jsonl").read_text().splitlines()[1])
    assert {"step", "id", "kind", "lane", "pos_m", "speed_mps", "action", "events"} <= set(rec)

    # the written config reproduces the run byte for byte
    out2 = tmp_path / "rerun"
    assert main(["train", "-c", str(d / "config.yaml"), "--out", str(out2)]) == 0
    assert (out2 / "highway_ramping/dqn/gcn/seed0/metrics.csv").read_bytes() == (d / "metrics.csv").read_bytes()

    capsys.readouterr()
    assert main(["evaluate", "-c", str(d / "config.yaml"), "--checkpoint", str(d / "checkpoint"),
                 "--episodes", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["status"] == "ok"
    assert main(["evaluate", "-c", str(d / "config.yaml"), "encoder.kind=flat",
                 "--checkpoint", str(d / "checkpoint")]) == 2
    assert main(["evaluate", "-c", str(d / "config.yaml"), "--checkpoint", str(tmp_path / "nope")]) == 2


def test_ablate_writes_report(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["ablate", "-c", str(CONFIGS / "fig8_ppo.yaml"), *SMOKE, "run.seeds=[0,1]", "--out", str(out)])
    assert code == 0
    d = out / "figure_eight" / "ppo" / "ablation"
    rep = json.loads((d / "report.json").read_text())
    assert rep["algorithm"] == "ppo" and [r["seed"] for r in rep["per_seed"]] == [0, 1]
    assert (d / "report.txt").read_text().startswith("figure_eight / ppo")
    assert (d / "curve_gcn.csv").read_text().splitlines()[0] == "epoch,mean,std"
    assert (out / "figure_eight" / "ppo" / "flat" / "seed1" / "metrics.csv").exists()
    assert "GRL (gcn)" in capsys.readouterr().out


def test_compare_writes_table(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["compare", "-c", str(CONFIGS / "fig8_ppo.yaml"), *SMOKE, "--algorithms", "ppo,ddpg",
                 "--out", str(out)]) == 0
    table = (out / "figure_eight" / "comparison.txt").read_text()
    assert "ppo" in table and "ddpg" in table
    assert main(["compare", "-c", str(CONFIGS / "fig8_ppo.yaml"), "--algorithms", "dqn",
                 "--out", str(out)]) == 2
    assert main(["compare", "-c", str(CONFIGS / "fig8_ppo.yaml"), "--algorithms", "nope",
                 "--out", str(out)]) == 2


def test_runtime_failure_exits_1(tmp_path, monkeypatch):
    import grl_traffic.cli as cli

    def boom(*a, **k):
        raise RuntimeError("disk on fire")
    monkeypatch.setattr(cli, "run_many", boom)
    assert main(["train", "-c", str(CONFIGS / "smoke.yaml"), "--out", str(tmp_path)]) == 1


def test_diverged_training_exits_1(tmp_path, monkeypatch):
    from grl_traffic.algorithms.dqn import DQNAgent

    def explode(self, *a, **k):
        raise FloatingPointError("dqn: non-finite loss")
    monkeypatch.setattr(DQNAgent, "update", explode)
    assert main(["train", "-c", str(CONFIGS / "smoke.yaml"), "--out", str(tmp_path)]) == 1
    assert (tmp_path / "highway_ramping/dqn/gcn/seed0/checkpoint").exists()
