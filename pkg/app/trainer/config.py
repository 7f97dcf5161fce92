from __future__ import annotations

from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any, Dict, Optional

from app.core.errors import ConfigError
from app.core.models import EpsilonSchedule
from app.mixers import DEFAULT_ALPHA, MixerKind


class MemoryMode(str, Enum):
    none = "none"
    sem = "sem"
    saem = "saem"


@dataclass(frozen=True)
class TrainerConfig:
    env: str = "matrix_game"
    env_params: Dict[str, Any] = field(default_factory=dict)

    mixer: MixerKind = MixerKind.vdn
    memory: MemoryMode = MemoryMode.sem
    lam: float = 0.1
    alpha: float = DEFAULT_ALPHA

    # episodic memory (desk-scale defaults)
    table_capacity: int = 10_000
    mset_capacity: int = 500
    projection_dim: int = 4
    quantization: float = 1e-6
    use_projection: bool = True
    shadow: bool = True

    gamma: float = 0.99
    learning_rate: float = 5e-4
    rms_decay: float = 0.99
    rms_epsilon: float = 1e-5
    grad_clip: Optional[float] = 10.0
    batch_size: int = 32
    buffer_capacity: int = 5000
    target_sync_episodes: int = 200
    train_steps_per_episode: int = 1
    epsilon: EpsilonSchedule = field(default_factory=lambda: EpsilonSchedule(anneal_steps=5000))
    total_steps: int = 10_000
    eval_interval: int = 1000
    eval_episodes: int = 32

    hidden_dim: int = 64
    mixer_embed_dim: int = 32
    critic_hidden_dim: int = 64
    # None: follow the environment's default
    recurrent: Optional[bool] = None

    seed: int = 0
    record_wall_clock: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "mixer", MixerKind(self.mixer))
        object.__setattr__(self, "memory", MemoryMode(self.memory))
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"must lie in [0, 1], got {self.lam}", field="lam")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"must lie in (0, 1], got {self.alpha}", field="alpha")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"must lie in [0, 1), got {self.gamma}", field="gamma")
        if self.quantization <= 0.0:
            raise ConfigError("must be positive", field="quantization")
        if self.grad_clip is not None and self.grad_clip <= 0.0:
            raise ConfigError("must be positive when set", field="grad_clip")
        if self.total_steps < 0:
            raise ConfigError("must be non-negative", field="total_steps")
        if self.eval_episodes < 0:
            raise ConfigError("must be non-negative", field="eval_episodes")
        for name in (
            "table_capacity",
            "mset_capacity",
            "projection_dim",
            "batch_size",
            "buffer_capacity",
            "target_sync_episodes",
            "train_steps_per_episode",
            "eval_interval",
            "hidden_dim",
            "mixer_embed_dim",
            "critic_hidden_dim",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError("must be positive", field=name)
        if self.batch_size > self.buffer_capacity:
            raise ConfigError("cannot exceed buffer_capacity", field="batch_size")

    @property
    def effective_lambda(self) -> float:
        return 0.0 if self.memory is MemoryMode.none else self.lam

    def replace(self, **changes: Any) -> "TrainerConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return TrainerConfig(**values)
