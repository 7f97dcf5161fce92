from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from app.core.errors import OracleInfeasible
from .base import DecPOMDP, EnvSpec, OracleResult, ORACLE_PAIR_CAP

CLIMBING_PAYOFF = [[11.0, -30.0, 0.0], [-30.0, 7.0, 6.0], [0.0, 0.0, 5.0]]


class MatrixGame(DecPOMDP):
    """One-shot cooperative game over a payoff tensor indexed by the joint action."""

    env_id = "matrix_game"

    def __init__(self, payoff: Sequence = CLIMBING_PAYOFF, gamma_hint: float = 0.99) -> None:
        table = np.asarray(payoff, dtype=np.float64)
        if table.ndim < 1 or len(set(table.shape)) != 1:
            raise ValueError(f"payoff must be a hypercube (one axis per agent), got shape {table.shape}")
        if not np.all(np.isfinite(table)):
            raise ValueError("payoff entries must be finite")
        self.payoff = table
        super().__init__(
            EnvSpec(
                n_agents=table.ndim,
                n_actions=table.shape[0],
                obs_dim=1,
                state_dim=1,
                episode_limit=1,
                gamma_hint=gamma_hint,
            )
        )

    def _reset(self, seed: int) -> None:
        pass

    def _step(self, joint_action: Tuple[int, ...]) -> Tuple[float, bool, bool]:
        reward = float(self.payoff[joint_action])
        return reward, True, reward >= float(self.payoff.max())

    def global_state(self) -> np.ndarray:
        return np.zeros(1, dtype=np.float64)

    def observe(self, agent: int) -> np.ndarray:
        return np.ones(1, dtype=np.float64)

    def oracle_optimal_return(self, gamma: float) -> OracleResult:
        if self.payoff.size > ORACLE_PAIR_CAP:
            raise OracleInfeasible(f"{self.payoff.size} joint actions exceed the oracle cap")
        best = tuple(int(i) for i in np.unravel_index(int(np.argmax(self.payoff)), self.payoff.shape))
        value = float(self.payoff.max())
        return OracleResult(
            optimal_discounted_return=value,
            best_case_return=value,
            optimal_joint_policy={(): best},
            state_values={(): value},
        )
