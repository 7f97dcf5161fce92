from __future__ import annotations

from typing import Tuple

import numpy as np

from app.core.errors import OracleInfeasible
from .base import DecPOMDP, EnvSpec, OracleResult, ORACLE_PAIR_CAP, joint_actions


class LeverCoordination(DecPOMDP):
    """Repeated coordination on a hidden correct lever.

    Each agent sees its own identity and a noisy private copy of a public cue
    pointing at the correct lever (resampled every step). Reward 1 and the
    episode ends when every agent pulls the correct lever on the same step.
    """

    env_id = "lever_coordination"
    recurrent_agents = True

    def __init__(
        self,
        n_agents: int = 2,
        n_levers: int = 3,
        cue_noise: float = 0.2,
        episode_limit: int = 5,
        gamma_hint: float = 0.99,
    ) -> None:
        if not 0.0 <= cue_noise <= 1.0:
            raise ValueError("cue_noise must lie in [0, 1]")
        super().__init__(
            EnvSpec(
                n_agents=n_agents,
                n_actions=n_levers,
                obs_dim=n_agents + n_levers,
                state_dim=n_levers + 1,
                episode_limit=episode_limit,
                gamma_hint=gamma_hint,
            )
        )
        self.n_levers = n_levers
        self.cue_noise = cue_noise
        self.correct = 0
        self._cues = np.zeros(n_agents, dtype=np.int64)
        self._rng = np.random.default_rng(0)

    def _draw_cues(self) -> None:
        n = self.spec.n_agents
        noisy = self._rng.random(n) < self.cue_noise
        random_levers = self._rng.integers(self.n_levers, size=n)
        self._cues = np.where(noisy, random_levers, self.correct)

    def _reset(self, seed: int) -> None:
        self._rng = np.random.default_rng(seed)
        self.correct = int(self._rng.integers(self.n_levers))
        self._draw_cues()

    def _step(self, joint_action: Tuple[int, ...]) -> Tuple[float, bool, bool]:
        if all(a == self.correct for a in joint_action):
            return 1.0, True, True
        self._draw_cues()
        return 0.0, False, False

    def global_state(self) -> np.ndarray:
        state = np.zeros(self.spec.state_dim, dtype=np.float64)
        state[self.correct] = 1.0
        state[-1] = self.t / self.spec.episode_limit
        return state

    def observe(self, agent: int) -> np.ndarray:
        obs = np.zeros(self.spec.obs_dim, dtype=np.float64)
        obs[agent] = 1.0
        obs[self.spec.n_agents + int(self._cues[agent])] = 1.0
        return obs

    def oracle_optimal_return(self, gamma: float) -> OracleResult:
        limit = self.spec.episode_limit
        joints = joint_actions(self.spec.n_agents, self.n_levers)
        pairs = self.n_levers * limit * len(joints)
        if pairs > ORACLE_PAIR_CAP:
            raise OracleInfeasible(f"{pairs} (state, joint action) pairs exceed the oracle cap")

        # backward induction over (correct lever, t); the cue never changes the dynamics
        values = {}
        policy = {}
        for c in range(self.n_levers):
            following = 0.0
            for t in range(limit - 1, -1, -1):
                coordinated = np.all(joints == c, axis=1)
                q = np.where(coordinated, 1.0, gamma * following)
                best = int(np.argmax(q))
                values[(c, t)] = float(q[best])
                policy[(c, t)] = tuple(int(a) for a in joints[best])
                following = values[(c, t)]
        optimal = float(np.mean([values[(c, 0)] for c in range(self.n_levers)]))
        return OracleResult(
            optimal_discounted_return=optimal,
            best_case_return=max(values.values()),
            optimal_joint_policy=policy,
            state_values=values,
        )
