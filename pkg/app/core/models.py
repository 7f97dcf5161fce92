from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Dict, List, Tuple
import math
import time
import uuid

import numpy as np

from .errors import EmptyEpisode


@dataclass
class Transition:
    observations: np.ndarray  # (n_agents, obs_dim)
    joint_action: Tuple[int, ...]
    global_state: np.ndarray  # (state_dim,)
    reward: float
    terminal: bool = False

    def __post_init__(self) -> None:
        if len(self.observations) != len(self.joint_action):
            raise ValueError("one observation per agent is required")
        if not math.isfinite(self.reward):
            raise ValueError(f"reward must be finite, got {self.reward}")


@dataclass
class Episode:
    transitions: List[Transition]
    final_observations: np.ndarray
    final_state: np.ndarray
    seed: int = 0
    env_id: str = ""
    success: bool = False

    def __post_init__(self) -> None:
        if not self.transitions:
            raise EmptyEpisode("an episode holds at least one transition")
        for transition in self.transitions[:-1]:
            if transition.terminal:
                raise ValueError("only the last transition may be terminal")

    def __len__(self) -> int:
        return len(self.transitions)

    @property
    def n_agents(self) -> int:
        return len(self.transitions[0].joint_action)

    @property
    def rewards(self) -> List[float]:
        return [t.reward for t in self.transitions]

    @property
    def terminated(self) -> bool:
        return self.transitions[-1].terminal

    def states(self) -> np.ndarray:
        """s_1..s_T followed by the state reached after the last step, shape (T+1, F)."""
        return np.stack([t.global_state for t in self.transitions] + [self.final_state])


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.05
    anneal_steps: int = 50_000

    def __post_init__(self) -> None:
        if not (1.0 >= self.start >= self.end >= 0.0):
            raise ValueError("epsilon schedule needs 1 >= start >= end >= 0")
        if self.anneal_steps <= 0:
            raise ValueError("anneal_steps must be positive")


METRICS_COLUMNS = (
    "step",
    "episode",
    "loss",
    "mean_y",
    "mean_E_s",
    "mean_E_su",
    "eval_return_mean",
    "eval_success_rate",
    "table_size",
    "table_hits",
    "table_misses",
    "wall_ms",
)


@dataclass
class MetricsRecord:
    step: int
    episode: int
    loss: Optional[float] = None
    mean_y: Optional[float] = None
    mean_E_s: Optional[float] = None
    mean_E_su: Optional[float] = None
    eval_return_mean: Optional[float] = None
    eval_success_rate: Optional[float] = None
    table_size: int = 0
    table_hits: int = 0
    table_misses: int = 0
    wall_ms: int = 0

    def as_row(self) -> Dict[str, object]:
        return {name: getattr(self, name) for name in METRICS_COLUMNS}


class RunStatus(str, Enum):
    queued = "queued"
    running = "running"
    done = "done"
    error = "error"


@dataclass
class Run:
    run_id: str
    status: RunStatus = RunStatus.queued

    config_path: Optional[str] = None
    out_dir: Optional[str] = None
    artifacts: List[str] = field(default_factory=list)

    error: Optional[str] = None

    created_at: float = field(default_factory=lambda: time.time())
    timings: Dict[str, float] = field(default_factory=dict)

    @staticmethod
    def new() -> "Run":
        return Run(run_id=str(uuid.uuid4()))
