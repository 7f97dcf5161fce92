"""Experiment configuration: YAML sections validated by pydantic models.

Validation errors are reported with the YAML line of the offending key.
Documented defaults: lambda 0.1, D 4, |M| 5000, |Q^S| 10^6, gamma 0.99,
B 32, buffer 5000, target sync every 200 episodes, 32 evaluation episodes.
The bundled configs under configs/ use desk-scale values (10^4 and 500).
"""
from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.errors import ConfigError
from app.core.models import EpsilonSchedule
from app.envs import ENV_REGISTRY, make_env
from app.mixers import DEFAULT_ALPHA, MixerKind
from app.trainer import MemoryMode, TrainerConfig

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_ROOT = "runs"
RESOLVED_NAME = "config.resolved.yaml"


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class EnvBlock(_Block):
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("name")
    @classmethod
    def _known(cls, value: str) -> str:
        if value not in ENV_REGISTRY:
            raise ValueError(f"unknown environment, choose from {sorted(ENV_REGISTRY)}")
        return value

    @model_validator(mode="after")
    def _buildable(self) -> "EnvBlock":
        try:
            make_env(self.name, self.params)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"invalid parameters for {self.name}: {exc}") from None
        return self


class AlgoBlock(_Block):
    mixer: MixerKind = MixerKind.vdn
    memory: MemoryMode = MemoryMode.sem
    lam: float = Field(0.1, ge=0.0, le=1.0, alias="lambda")
    alpha: float = Field(DEFAULT_ALPHA, gt=0.0, le=1.0)


class MemoryBlock(_Block):
    table_capacity: int = Field(1_000_000, gt=0)
    mset_capacity: int = Field(5000, gt=0)
    projection_dim: int = Field(4, gt=0)
    quantization: float = Field(1e-6, gt=0.0)
    projection: bool = True
    shadow: bool = True


class EpsilonBlock(_Block):
    start: float = Field(1.0, ge=0.0, le=1.0)
    end: float = Field(0.05, ge=0.0, le=1.0)
    anneal_steps: int = Field(5000, gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> "EpsilonBlock":
        if self.end > self.start:
            raise ValueError("end must not exceed start")
        return self


class TrainingBlock(_Block):
    gamma: float = Field(0.99, ge=0.0, lt=1.0)
    lr: float = Field(5e-4, gt=0.0)
    rms_decay: float = Field(0.99, ge=0.0, lt=1.0)
    rms_epsilon: float = Field(1e-5, gt=0.0)
    grad_clip: Optional[float] = Field(10.0, gt=0.0)
    batch_size: int = Field(32, gt=0)
    buffer_capacity: int = Field(5000, gt=0)
    target_sync_episodes: int = Field(200, gt=0)
    train_steps_per_episode: int = Field(1, gt=0)
    epsilon: EpsilonBlock = Field(default_factory=EpsilonBlock)
    total_steps: int = Field(10_000, ge=0)
    eval_interval: int = Field(1000, gt=0)
    eval_episodes: int = Field(32, ge=0)
    hidden_dim: int = Field(64, gt=0)
    mixer_embed_dim: int = Field(32, gt=0)
    critic_hidden_dim: int = Field(64, gt=0)
    recurrent: Optional[bool] = None
    record_wall_clock: bool = False

    @model_validator(mode="after")
    def _batch_fits(self) -> "TrainingBlock":
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch_size cannot exceed buffer_capacity")
        return self


class OutputBlock(_Block):
    dir: Optional[str] = None
    workers: int = Field(1, gt=0)


class ExperimentConfig(_Block):
    name: str = "experiment"
    env: EnvBlock
    algo: AlgoBlock = Field(default_factory=AlgoBlock)
    memory: MemoryBlock = Field(default_factory=MemoryBlock)
    training: TrainingBlock = Field(default_factory=TrainingBlock)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    output: OutputBlock = Field(default_factory=OutputBlock)

    @field_validator("seeds")
    @classmethod
    def _distinct(cls, value: List[int]) -> List[int]:
        if len(set(value)) != len(value):
            raise ValueError("seeds must be distinct")
        return value

    def trainer_config(self, seed: int) -> TrainerConfig:
        t = self.training
        return TrainerConfig(
            env=self.env.name,
            env_params=dict(self.env.params),
            mixer=self.algo.mixer,
            memory=self.algo.memory,
            lam=self.algo.lam,
            alpha=self.algo.alpha,
            table_capacity=self.memory.table_capacity,
            mset_capacity=self.memory.mset_capacity,
            projection_dim=self.memory.projection_dim,
            quantization=self.memory.quantization,
            use_projection=self.memory.projection,
            shadow=self.memory.shadow,
            gamma=t.gamma,
            learning_rate=t.lr,
            rms_decay=t.rms_decay,
            rms_epsilon=t.rms_epsilon,
            grad_clip=t.grad_clip,
            batch_size=t.batch_size,
            buffer_capacity=t.buffer_capacity,
            target_sync_episodes=t.target_sync_episodes,
            train_steps_per_episode=t.train_steps_per_episode,
            epsilon=EpsilonSchedule(t.epsilon.start, t.epsilon.end, t.epsilon.anneal_steps),
            total_steps=t.total_steps,
            eval_interval=t.eval_interval,
            eval_episodes=t.eval_episodes,
            hidden_dim=t.hidden_dim,
            mixer_embed_dim=t.mixer_embed_dim,
            critic_hidden_dim=t.critic_hidden_dim,
            recurrent=t.recurrent,
            seed=seed,
            record_wall_clock=t.record_wall_clock,
        )

    def output_dir(self, override: Optional[Union[str, Path]] = None) -> Path:
        if override:
            return Path(override)
        if self.output.dir:
            return Path(self.output.dir)
        return Path(os.getenv("SEM_OUTPUT_ROOT", DEFAULT_OUTPUT_ROOT)) / self.name

    def resolved(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True)

    def with_value(self, path: str, value: Any) -> "ExperimentConfig":
        """Copy with one dotted key replaced, validated again (``algo.lambda``, ``memory.mset_capacity``...)."""
        data = self.resolved()
        node = data
        parts = path.split(".")
        for part in parts[:-1]:
            node = node[part]
        node[parts[-1]] = value
        return ExperimentConfig.model_validate(data)


def _line_of(root: Optional[yaml.Node], loc: Sequence[Union[str, int]]) -> Optional[int]:
    """1-based line of the deepest key of ``loc`` found in the composed document."""
    node, line = root, None
    for part in loc:
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                if key_node.value == str(part):
                    line = key_node.start_mark.line + 1
                    node = value_node
                    break
            else:
                break
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            node = node.value[part]
            line = node.start_mark.line + 1
        else:
            break
    if line is None and root is not None:
        line = root.start_mark.line + 1
    return line


def _field_name(loc: Tuple[Union[str, int], ...]) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"{source}: YAML syntax error: {getattr(exc, 'problem', exc)}", line=line) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping", line=1)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        problems = []
        for error in exc.errors():
            loc = tuple(error["loc"])
            problems.append((_field_name(loc), _line_of(root, loc), error["msg"]))
        field, line, message = problems[0]
        for other_field, other_line, other_message in problems[1:]:
            message += f"\nline {other_line}: {other_field}: {other_message}"
        raise ConfigError(message, field=field, line=line) from None


def parse_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", field="path")
    config = parse_config_text(path.read_text(encoding="utf-8"), source=str(path))
    logger.info("[config] path=%s env=%s mixer=%s memory=%s", path, config.env.name, config.algo.mixer.value, config.algo.memory.value)
    return config


def write_resolved(config: ExperimentConfig, out_dir: Union[str, Path]) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / RESOLVED_NAME
    path.write_text(yaml.safe_dump(config.resolved(), sort_keys=False), encoding="utf-8", newline="\n")
    return path
