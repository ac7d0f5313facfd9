"""Experiment configuration: YAML file + ``key=value`` overrides, validated up front."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .algorithms import AlgoConfig, ConfigError, supports
from .reward import RewardWeights
from .traffic.core import ScenarioConfig

FORMAT_VERSION = 1


class EncoderConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["gcn", "flat"] = "gcn"
    layers: list[int] = Field(default_factory=lambda: [32, 32], min_length=1)

    @field_validator("layers")
    @classmethod
    def _positive(cls, v):
        if any(w < 1 for w in v):
            raise ValueError("layer widths must be >= 1")
        return v


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)
    epochs: int = Field(150, ge=0)
    episodes_per_epoch: int = Field(10, ge=1)
    horizon: Optional[int] = Field(None, gt=0)
    output_dir: str = "runs"
    checkpoint_every: int = Field(0, ge=0)
    trace: bool = False
    workers: int = Field(1, ge=1)

    @field_validator("seeds")
    @classmethod
    def _distinct(cls, v):
        if len(set(v)) != len(v):
            raise ValueError("seeds must be distinct")
        return v


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int = FORMAT_VERSION
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    reward: RewardWeights = Field(default_factory=RewardWeights)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    algorithm: AlgoConfig = Field(default_factory=AlgoConfig)
    run: RunConfig = Field(default_factory=RunConfig)

    @property
    def horizon_steps(self) -> int:
        return self.scenario.horizon_steps

    def with_updates(self, **sections) -> "ExperimentConfig":
        """Copy with whole-section or nested-key changes, revalidated."""
        data = self.model_dump(mode="json")
        for path, value in sections.items():
            _set_path(data, path.split("__"), value)
        return build(data)


def _set_path(data: dict, keys: list[str], value) -> None:
    node = data
    for k in keys[:-1]:
        nxt = node.get(k)
        if not isinstance(nxt, dict):
            nxt = node[k] = {}
        node = nxt
    node[keys[-1]] = value


def _format_error(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "; ".join(lines)


def _cross_check(cfg: ExperimentConfig, raw: dict) -> None:
    discrete = cfg.scenario.is_highway
    if not supports(cfg.algorithm.id, discrete):
        space = "discrete lane commands" if discrete else "continuous accelerations"
        raise ConfigError(f"algorithm.id: {cfg.algorithm.id!r} cannot act on {space} "
                          f"(scenario.scenario = {cfg.scenario.scenario!r})")
    if cfg.format_version != FORMAT_VERSION:
        raise ConfigError(f"format_version: unsupported version {cfg.format_version}")
    scen_raw = raw.get("scenario") or {}
    if cfg.run.horizon is not None and "horizon_steps" in scen_raw \
            and scen_raw["horizon_steps"] != cfg.run.horizon:
        raise ConfigError("run.horizon: conflicts with scenario.horizon_steps; set only one")


def build(data: dict | None) -> ExperimentConfig:
    """Validate a plain mapping into a config; ``run.horizon`` is folded into the scenario."""
    data = dict(data or {})
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from None
    _cross_check(cfg, data)
    if cfg.run.horizon is not None and cfg.scenario.horizon_steps != cfg.run.horizon:
        scen = cfg.scenario.model_dump()
        scen["horizon_steps"] = cfg.run.horizon
        cfg = cfg.model_copy(update={"scenario": ScenarioConfig.model_validate(scen)})
    return cfg


def parse_override(item: str) -> tuple[list[str], object]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override {item!r} has an empty key")
    try:
        value = yaml.safe_load(raw) if raw.strip() else ""
    except yaml.YAMLError:
        value = raw
    return key.split("."), value


def load_mapping(path: str | Path | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: malformed YAML ({exc})") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    return data


def parse_config(path: str | Path | None = None, overrides=()) -> ExperimentConfig:
    """Load ``path`` (may be omitted or empty), apply overrides, validate everything."""
    data = load_mapping(path)
    for item in overrides:
        keys, value = parse_override(item)
        _set_path(data, keys, value)
    return build(data)


def to_mapping(cfg: ExperimentConfig) -> dict:
    return cfg.model_dump(mode="json")


def dumps(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_mapping(cfg), sort_keys=False)


def loads(text: str) -> ExperimentConfig:
    data = yaml.safe_load(text)
    if data is not None and not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    return build(data)
