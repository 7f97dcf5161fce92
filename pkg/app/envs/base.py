from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import EpisodeOver, InvalidAction

# exhaustive oracles refuse instances with more (state, joint-action) pairs than this
ORACLE_PAIR_CAP = 10**6


@dataclass(frozen=True)
class EnvSpec:
    n_agents: int
    n_actions: int
    obs_dim: int
    state_dim: int
    episode_limit: int
    gamma_hint: float = 0.99

    def __post_init__(self) -> None:
        for name in ("n_agents", "n_actions", "obs_dim", "state_dim", "episode_limit"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class StepResult:
    reward: float
    state: np.ndarray
    observations: np.ndarray
    terminated: bool
    # terminated because of the episode limit, not a true terminal
    truncated: bool = False
    success: bool = False


@dataclass
class OracleResult:
    optimal_discounted_return: float
    best_case_return: float
    optimal_joint_policy: Optional[Dict[Any, Tuple[int, ...]]] = None
    state_values: Optional[Dict[Any, float]] = field(default=None, repr=False)

    def value_of(self, state_key: Any) -> float:
        if self.state_values is None:
            raise KeyError("oracle did not record per-state values")
        return self.state_values[state_key]


class DecPOMDP(ABC):
    """Cooperative Dec-POMDP with a shared reward and an exposed global state."""

    env_id: str = "env"
    # agents get a recurrent cell unless the run overrides it
    recurrent_agents: bool = False

    def __init__(self, spec: EnvSpec) -> None:
        self.spec = spec
        self.t = 0
        self.done = True

    @abstractmethod
    def _reset(self, seed: int) -> None: ...

    @abstractmethod
    def _step(self, joint_action: Tuple[int, ...]) -> Tuple[float, bool, bool]:
        """Advance internal state; returns (reward, goal_reached, success)."""

    @abstractmethod
    def global_state(self) -> np.ndarray: ...

    @abstractmethod
    def observe(self, agent: int) -> np.ndarray: ...

    @abstractmethod
    def oracle_optimal_return(self, gamma: float) -> OracleResult: ...

    def observations(self) -> np.ndarray:
        return np.stack([self.observe(a) for a in range(self.spec.n_agents)])

    def reset(self, seed: int) -> Tuple[np.ndarray, np.ndarray]:
        self.t = 0
        self.done = False
        self._reset(int(seed))
        return self.global_state(), self.observations()

    def step(self, joint_action: Sequence[int]) -> StepResult:
        if self.done:
            raise EpisodeOver(f"{self.env_id}: step called after termination")
        joint = self._check_action(joint_action)
        reward, goal, success = self._step(joint)
        self.t += 1
        truncated = (not goal) and self.t >= self.spec.episode_limit
        self.done = goal or truncated
        return StepResult(
            reward=float(reward),
            state=self.global_state(),
            observations=self.observations(),
            terminated=self.done,
            truncated=truncated,
            success=success,
        )

    def _check_action(self, joint_action: Sequence[int]) -> Tuple[int, ...]:
        if len(joint_action) != self.spec.n_agents:
            raise InvalidAction(f"expected {self.spec.n_agents} actions, got {len(joint_action)}")
        joint: List[int] = []
        for agent, action in enumerate(joint_action):
            action = int(action)
            if not 0 <= action < self.spec.n_actions:
                raise InvalidAction(f"agent {agent}: action {action} outside [0, {self.spec.n_actions})")
            joint.append(action)
        return tuple(joint)


def reset(env: DecPOMDP, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    return env.reset(seed)


def step(env: DecPOMDP, joint_action: Sequence[int]) -> StepResult:
    return env.step(joint_action)


def oracle_optimal_return(env: DecPOMDP, gamma: float | None = None) -> OracleResult:
    return env.oracle_optimal_return(env.spec.gamma_hint if gamma is None else gamma)


def joint_actions(n_agents: int, n_actions: int) -> np.ndarray:
    """Every joint action, lexicographic, shape (n_actions**n_agents, n_agents)."""
    grids = np.meshgrid(*[np.arange(n_actions)] * n_agents, indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)
