"""Episodes, epochs, seeds, evaluation and the GCN-vs-flat ablation.

Workers only compute: they return results (including serialized
checkpoints) to the caller, which owns every file write.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import checkpoint as ckpt
from .algorithms import Agent, ConfigError, make_agent
from .algorithms.policy import EVAL, TRAIN, PolicyError
from .config import ExperimentConfig, build, dumps, to_mapping
from .env import EpisodeMetrics, TrafficEnv
from .rng import Streams

CSV_HEADER = "epoch,seed,scenario,algorithm,encoder,mean_reward,collisions,lane_changes,exits,mean_speed"


@dataclass
class EpisodeResult:
    reward: float
    metrics: EpisodeMetrics
    transitions: list = field(default_factory=list)
    trace: list = field(default_factory=list)


@dataclass
class EpochRecord:
    epoch: int
    mean_reward: float
    collisions: float
    lane_changes: float
    exits: float
    mean_speed: float


@dataclass
class RunResult:
    fingerprint: str
    scenario: str
    algorithm: str
    encoder: str
    seed: int
    records: list[EpochRecord] = field(default_factory=list)
    wall_seconds: float = 0.0
    diverged: bool = False
    error: str = ""
    checkpoint: bytes = b""
    checkpoints: dict[int, bytes] = field(default_factory=dict)
    trace: list = field(default_factory=list)
    checkpoint_path: Optional[str] = None

    @property
    def rewards(self) -> np.ndarray:
        return np.array([r.mean_reward for r in self.records])


def fingerprint(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(dumps(cfg).encode()).hexdigest()[:16]


def check_compatible(env, agent: Agent) -> None:
    if env.spec.discrete != agent.spec.discrete:
        raise ConfigError(f"{agent.algorithm}: action space does not match the environment")


def run_episode(env, agent: Agent, mode: str, rng=None, record: bool = False) -> EpisodeResult:
    """Roll one episode to the horizon (or termination).

    In train mode every transition is handed to the agent, which decides
    when to learn.  ``rng`` is accepted for interface symmetry; stochasticity
    lives in the env and agent streams.
    """
    check_compatible(env, agent)
    obs = env.reset()
    total = 0.0
    transitions, trace = [], []
    for t in range(env.max_decisions):
        actions = agent.act(obs, mode)
        next_obs, reward, done, info = env.step(actions)
        total += reward
        end = done or info.truncated or t == env.max_decisions - 1
        if mode == TRAIN:
            agent.observe(obs, actions, reward, next_obs, done, end)
        if record:
            transitions.append((obs, actions, reward, next_obs, done))
        trace.extend(info.trace)
        obs = next_obs
        if end:
            break
    if mode == TRAIN:
        agent.end_episode()
    return EpisodeResult(total, env.metrics, transitions, trace)


def build_agent(cfg: ExperimentConfig, env: TrafficEnv, streams: Streams) -> Agent:
    total = cfg.run.epochs * cfg.run.episodes_per_epoch * env.max_decisions
    return make_agent(env.spec, cfg.algorithm, cfg.encoder.kind, tuple(cfg.encoder.layers),
                      streams["exploration"], total, init_rng=streams["init"])


def train(cfg: ExperimentConfig, seed: Optional[int] = None) -> RunResult:
    """Train one (config, seed) run; NaNs mark the run diverged instead of raising."""
    seed = cfg.run.seeds[0] if seed is None else int(seed)
    streams = Streams(seed)
    env = TrafficEnv(cfg.scenario, cfg.reward, streams["sim"], trace=cfg.run.trace)
    agent = build_agent(cfg, env, streams)
    result = RunResult(fingerprint(cfg), cfg.scenario.scenario, cfg.algorithm.id, cfg.encoder.kind, seed)
    start = time.perf_counter()
    last_trace: list = []
    try:
        for epoch in range(cfg.run.epochs):
            eps = []
            for _ in range(cfg.run.episodes_per_epoch):
                ep = run_episode(env, agent, TRAIN)
                if not math.isfinite(ep.reward):
                    raise FloatingPointError("non-finite episode reward")
                eps.append(ep.metrics)
                last_trace = ep.trace
            result.records.append(EpochRecord(
                epoch, float(np.mean([m.reward for m in eps])),
                float(np.mean([m.collisions for m in eps])),
                float(np.mean([m.lane_changes for m in eps])),
                float(np.mean([m.exits for m in eps])),
                float(np.mean([m.mean_speed for m in eps]))))
            every = cfg.run.checkpoint_every
            if every and (epoch + 1) % every == 0:
                result.checkpoints[epoch + 1] = ckpt.dumps(agent.checkpoint())
    except (FloatingPointError, PolicyError) as exc:
        result.diverged = True
        result.error = str(exc)
    result.checkpoint = ckpt.dumps(agent.checkpoint())
    result.trace = last_trace
    result.wall_seconds = time.perf_counter() - start
    return result


def _train_job(args):
    data, seed = args
    return train(build(data), seed)


def run_many(jobs: Sequence[tuple[ExperimentConfig, int]], workers: int = 1) -> list[RunResult]:
    """Train several (config, seed) jobs, in a process pool when ``workers > 1``.

    Results come back in job order regardless of completion order.
    """
    payload = [(to_mapping(c), s) for c, s in jobs]
    if workers <= 1 or len(jobs) <= 1:
        return [_train_job(p) for p in payload]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_train_job, payload))


def final_quarter_mean(rewards: Sequence[float]) -> float:
    """Mean over the last ``ceil(n/4)`` entries (NaN for an empty list)."""
    r = list(rewards)
    if not r:
        return float("nan")
    k = max(1, math.ceil(len(r) / 4))
    return float(np.mean(r[-k:]))


def optimization_rate(drl: float, grl: float) -> float:
    """Percent improvement of GRL over DRL, relative to ``|DRL|``."""
    if drl == 0 or not (math.isfinite(drl) and math.isfinite(grl)):
        return float("nan")
    return (grl - drl) / abs(drl) * 100.0


@dataclass
class SeedRow:
    seed: int
    drl: float
    grl: float
    drl_diverged: bool = False
    grl_diverged: bool = False


@dataclass
class ComparisonReport:
    scenario: str
    algorithm: str
    drl_mean: float
    grl_mean: float
    optimization_rate: float
    per_seed: list[SeedRow]
    grl_encoder: str = "gcn"
    drl_encoder: str = "flat"
    format_version: int = 1

    @classmethod
    def from_rows(cls, scenario, algorithm, rows: list[SeedRow], grl_encoder="gcn",
                  drl_encoder="flat") -> "ComparisonReport":
        drl = float(np.mean([r.drl for r in rows])) if rows else float("nan")
        grl = float(np.mean([r.grl for r in rows])) if rows else float("nan")
        return cls(scenario, algorithm, drl, grl, optimization_rate(drl, grl), rows,
                   grl_encoder, drl_encoder)

    @property
    def seeds_grl_at_least_drl(self) -> int:
        return sum(1 for r in self.per_seed if r.grl >= r.drl)

    def to_json(self) -> str:
        data = asdict(self)
        data["seeds_grl_at_least_drl"] = self.seeds_grl_at_least_drl
        return json.dumps(data, indent=2, allow_nan=True)

    def table(self) -> str:
        head = ("seed", f"DRL ({self.drl_encoder})", f"GRL ({self.grl_encoder})", "rate %")
        body = [(str(r.seed), f"{r.drl:.3f}" + ("*" if r.drl_diverged else ""),
                 f"{r.grl:.3f}" + ("*" if r.grl_diverged else ""),
                 f"{optimization_rate(r.drl, r.grl):.2f}") for r in self.per_seed]
        body.append(("mean", f"{self.drl_mean:.3f}", f"{self.grl_mean:.3f}",
                     f"{self.optimization_rate:.2f}"))
        widths = [max(len(row[i]) for row in [head, *body]) for i in range(4)]
        fmt = lambda row: "  ".join(c.rjust(w) for c, w in zip(row, widths))
        lines = [f"{self.scenario} / {self.algorithm}", fmt(head), fmt(["-" * w for w in widths])]
        lines += [fmt(row) for row in body]
        if any(r.drl_diverged or r.grl_diverged for r in self.per_seed):
            lines.append("* run diverged; value covers the epochs completed before divergence")
        return "\n".join(lines)


def curve(results: Sequence[RunResult]) -> list[tuple[int, float, float]]:
    """(epoch, mean, std) across seeds over the epochs every run completed."""
    if not results:
        return []
    n = min(len(r.records) for r in results)
    out = []
    for e in range(n):
        vals = np.array([r.records[e].mean_reward for r in results])
        out.append((e, float(vals.mean()), float(vals.std())))
    return out


@dataclass
class AblationResult:
    report: ComparisonReport
    grl_runs: list[RunResult]
    drl_runs: list[RunResult]


def ablate(cfg: ExperimentConfig, grl_encoder: str = "gcn", drl_encoder: str = "flat",
           workers: Optional[int] = None) -> AblationResult:
    """Train both arms on identical seeds and hyperparameters and compare final-quarter rewards."""
    seeds = list(cfg.run.seeds)
    grl_cfg = cfg.with_updates(encoder__kind=grl_encoder)
    drl_cfg = cfg.with_updates(encoder__kind=drl_encoder)
    jobs = [(grl_cfg, s) for s in seeds] + [(drl_cfg, s) for s in seeds]
    results = run_many(jobs, workers or cfg.run.workers)
    grl_runs, drl_runs = results[:len(seeds)], results[len(seeds):]
    rows = [SeedRow(s, final_quarter_mean(d.rewards), final_quarter_mean(g.rewards),
                    d.diverged, g.diverged) for s, g, d in zip(seeds, grl_runs, drl_runs)]
    report = ComparisonReport.from_rows(cfg.scenario.scenario, cfg.algorithm.id, rows,
                                        grl_encoder, drl_encoder)
    return AblationResult(report, grl_runs, drl_runs)


def compare(cfg: ExperimentConfig, algorithms: Sequence[str],
            workers: Optional[int] = None) -> list[AblationResult]:
    return [ablate(cfg.with_updates(algorithm__id=a), workers=workers) for a in algorithms]


def compare_table(reports: Sequence[ComparisonReport]) -> str:
    head = ("algorithm", "DRL mean", "GRL mean", "rate %")
    body = [(r.algorithm, f"{r.drl_mean:.3f}", f"{r.grl_mean:.3f}", f"{r.optimization_rate:.2f}")
            for r in reports]
    widths = [max(len(row[i]) for row in [head, *body]) for i in range(4)]
    fmt = lambda row: "  ".join(c.rjust(w) for c, w in zip(row, widths))
    return "\n".join([fmt(head), fmt(["-" * w for w in widths]), *(fmt(b) for b in body)])


def evaluate(checkpoint: ckpt.Checkpoint, cfg: ExperimentConfig, episodes: int,
             seed: Optional[int] = None) -> dict:
    """Greedy / mean-action rollouts of a saved policy."""
    if checkpoint.algorithm != cfg.algorithm.id or checkpoint.encoder != cfg.encoder.kind:
        raise ConfigError(
            f"checkpoint is {checkpoint.algorithm}/{checkpoint.encoder}, config asks for "
            f"{cfg.algorithm.id}/{cfg.encoder.kind}")
    seed = cfg.run.seeds[0] if seed is None else int(seed)
    summary = {"algorithm": cfg.algorithm.id, "encoder": cfg.encoder.kind,
               "scenario": cfg.scenario.scenario, "seed": seed, "episodes": int(episodes)}
    if episodes <= 0:
        summary["status"] = "no data"
        return summary
    streams = Streams(seed)
    env = TrafficEnv(cfg.scenario, cfg.reward, streams["eval-sim"])
    agent = build_agent(cfg, env, streams)
    agent.load_state_dict(checkpoint.params)
    eps = [run_episode(env, agent, EVAL).metrics for _ in range(episodes)]
    rewards = np.array([m.reward for m in eps])
    spawned = sum(m.av_spawned for m in eps)
    summary.update({
        "status": "ok",
        "mean_reward": float(rewards.mean()),
        "std_reward": float(rewards.std()),
        "collision_rate": float(np.mean([m.collisions for m in eps])),
        "mean_speed": float(np.mean([m.mean_speed for m in eps])),
    })
    if cfg.scenario.is_highway:
        summary["ramp_exit_rate"] = sum(m.exits for m in eps) / spawned if spawned else 0.0
    return summary


# -- serialization (aggregator side)

def _num(x: float) -> str:
    return repr(float(x))


def metrics_csv(result: RunResult) -> str:
    lines = [CSV_HEADER]
    for r in result.records:
        lines.append(",".join([str(r.epoch), str(result.seed), result.scenario, result.algorithm,
                               result.encoder, _num(r.mean_reward), _num(r.collisions),
                               _num(r.lane_changes), _num(r.exits), _num(r.mean_speed)]))
    return "\n".join(lines) + "\n"


def curve_csv(points) -> str:
    return "epoch,mean,std\n" + "".join(f"{e},{_num(m)},{_num(s)}\n" for e, m, s in points)


def trace_jsonl(result: RunResult) -> str:
    head = {"format_version": 1, "scenario": result.scenario, "algorithm": result.algorithm,
            "encoder": result.encoder, "seed": result.seed}
    return "".join(json.dumps(r) + "\n" for r in [head, *result.trace])
