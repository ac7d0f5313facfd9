"""Run-directory layout and writers; only the aggregating process calls these."""

from __future__ import annotations

from pathlib import Path

from .config import ExperimentConfig, dumps
from .harness import AblationResult, RunResult, curve, curve_csv, metrics_csv, trace_jsonl


def run_dir(root: str | Path, result: RunResult) -> Path:
    return Path(root) / result.scenario / result.algorithm / result.encoder / f"seed{result.seed}"


def write_run(root: str | Path, cfg: ExperimentConfig, result: RunResult) -> Path:
    """Write metrics, checkpoint(s), the resolved single-seed config and the optional trace."""
    d = run_dir(root, result)
    d.mkdir(parents=True, exist_ok=True)
    resolved = cfg.with_updates(encoder__kind=result.encoder, run__seeds=[result.seed])
    (d / "config.yaml").write_text(dumps(resolved))
    (d / "metrics.csv").write_text(metrics_csv(result))
    (d / "checkpoint").write_bytes(result.checkpoint)
    for epoch, blob in sorted(result.checkpoints.items()):
        (d / f"checkpoint.epoch{epoch}").write_bytes(blob)
    if cfg.run.trace:
        (d / "trace.jsonl").write_text(trace_jsonl(result))
    result.checkpoint_path = str(d / "checkpoint")
    return d


def write_ablation(root: str | Path, cfg: ExperimentConfig, ab: AblationResult) -> Path:
    for run in [*ab.grl_runs, *ab.drl_runs]:
        write_run(root, cfg, run)
    rep = ab.report
    d = Path(root) / rep.scenario / rep.algorithm / "ablation"
    d.mkdir(parents=True, exist_ok=True)
    (d / "report.json").write_text(rep.to_json() + "\n")
    (d / "report.txt").write_text(rep.table() + "\n")
    (d / f"curve_{rep.grl_encoder}.csv").write_text(curve_csv(curve(ab.grl_runs)))
    (d / f"curve_{rep.drl_encoder}.csv").write_text(curve_csv(curve(ab.drl_runs)))
    return d
