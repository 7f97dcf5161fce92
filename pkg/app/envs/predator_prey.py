from __future__ import annotations

import logging
from typing import List, Tuple

import numpy as np

from app.core.errors import OracleInfeasible
from .base import DecPOMDP, EnvSpec, OracleResult, ORACLE_PAIR_CAP, joint_actions

logger = logging.getLogger(__name__)

# stay, up, down, left, right
MOVES = np.array([[0, 0], [0, -1], [0, 1], [-1, 0], [1, 0]], dtype=np.int64)


class PredatorPreyGrid(DecPOMDP):
    """Predators on a W x H torus chasing a random-walking prey.

    Capture happens when every predator stands on the prey cell after the
    predators move; it pays ``capture_reward`` to all and ends the episode.
    Otherwise the prey takes a uniform random move (stay or one of four
    directions) drawn from its own generator, so prey noise never shares a
    stream with exploration.
    """

    env_id = "predator_prey_grid"

    def __init__(
        self,
        width: int = 4,
        height: int = 4,
        n_predators: int = 2,
        sight: int = 2,
        capture_reward: float = 10.0,
        episode_limit: int = 20,
        distance_shaping: float = 0.0,
        gamma_hint: float = 0.99,
    ) -> None:
        if width <= 0 or height <= 0 or n_predators <= 0 or sight < 0:
            raise ValueError("grid size and predator count must be positive, sight non-negative")
        self.width = width
        self.height = height
        self.n_cells = width * height
        self.sight = sight
        self.capture_reward = float(capture_reward)
        self.distance_shaping = float(distance_shaping)
        super().__init__(
            EnvSpec(
                n_agents=n_predators,
                n_actions=len(MOVES),
                obs_dim=width + height + 3 * n_predators,
                state_dim=2 * (n_predators + 1),
                episode_limit=episode_limit,
                gamma_hint=gamma_hint,
            )
        )
        self.predators = np.zeros((n_predators, 2), dtype=np.int64)
        self.prey = np.zeros(2, dtype=np.int64)
        self._prey_rng = np.random.default_rng(0)

    # -- dynamics -----------------------------------------------------------

    def _wrap(self, xy: np.ndarray) -> np.ndarray:
        return np.stack([xy[..., 0] % self.width, xy[..., 1] % self.height], axis=-1)

    def _captured(self) -> bool:
        return bool(np.all(self.predators == self.prey))

    def _reset(self, seed: int) -> None:
        placement = np.random.default_rng([seed, 0])
        self._prey_rng = np.random.default_rng([seed, 1])
        n = self.spec.n_agents
        while True:
            cells = placement.integers(self.n_cells, size=n + 1)
            self.predators = np.stack([cells[:n] % self.width, cells[:n] // self.width], axis=1)
            self.prey = np.array([cells[n] % self.width, cells[n] // self.width], dtype=np.int64)
            if not self._captured():
                break

    def _step(self, joint_action: Tuple[int, ...]) -> Tuple[float, bool, bool]:
        self.predators = self._wrap(self.predators + MOVES[list(joint_action)])
        if self._captured():
            return self.capture_reward, True, True
        self.prey = self._wrap(self.prey + MOVES[int(self._prey_rng.integers(len(MOVES)))])
        reward = 0.0
        if self.distance_shaping:
            reward -= self.distance_shaping * self._mean_distance(self.predators, self.prey)
        return reward, False, False

    def _offset(self, delta: np.ndarray, size: int) -> np.ndarray:
        # torus offset in [-size//2, size - size//2)
        return (delta + size // 2) % size - size // 2

    def _mean_distance(self, predators: np.ndarray, prey: np.ndarray) -> np.ndarray:
        dx = np.abs(self._offset(predators[..., 0] - prey[..., 0], self.width))
        dy = np.abs(self._offset(predators[..., 1] - prey[..., 1], self.height))
        return np.mean(dx + dy, axis=-1)

    # -- views --------------------------------------------------------------

    def global_state(self) -> np.ndarray:
        return np.concatenate([self.predators.reshape(-1), self.prey]).astype(np.float64)

    def _relative(self, me: np.ndarray, other: np.ndarray) -> List[float]:
        dx = int(self._offset(other[0] - me[0], self.width))
        dy = int(self._offset(other[1] - me[1], self.height))
        if abs(dx) > self.sight or abs(dy) > self.sight:
            return [0.0, 0.0, 0.0]
        scale = max(self.sight, 1)
        return [1.0, dx / scale, dy / scale]

    def observe(self, agent: int) -> np.ndarray:
        me = self.predators[agent]
        obs = np.zeros(self.spec.obs_dim, dtype=np.float64)
        obs[me[0]] = 1.0
        obs[self.width + me[1]] = 1.0
        features = self._relative(me, self.prey)
        for other in range(self.spec.n_agents):
            if other != agent:
                features += self._relative(me, self.predators[other])
        obs[self.width + self.height:] = features
        return obs

    # -- oracle -------------------------------------------------------------

    def oracle_optimal_return(self, gamma: float) -> OracleResult:
        """Finite-horizon centralized value iteration over every (positions, t)."""
        n = self.spec.n_agents
        limit = self.spec.episode_limit
        n_states = self.n_cells ** (n + 1)
        joints = joint_actions(n, len(MOVES))
        pairs = n_states * len(joints)
        if pairs > ORACLE_PAIR_CAP:
            raise OracleInfeasible(f"{pairs} (state, joint action) pairs exceed the oracle cap")

        index = np.arange(n_states)
        cells = np.stack([(index // self.n_cells**i) % self.n_cells for i in range(n + 1)], axis=1)
        xy = np.stack([cells % self.width, cells // self.width], axis=-1)  # (S, n+1, 2)
        predators, prey = xy[:, :n], xy[:, n]
        radix = self.n_cells ** np.arange(n + 1)

        def encode(pred_xy: np.ndarray, prey_xy: np.ndarray) -> np.ndarray:
            cell = np.concatenate(
                [pred_xy[..., 1] * self.width + pred_xy[..., 0], (prey_xy[..., 1] * self.width + prey_xy[..., 0])[:, None]],
                axis=1,
            )
            return cell @ radix

        moved_prey = [self._wrap(prey + move) for move in MOVES]
        outcomes = []
        for joint in joints:
            new_pred = self._wrap(predators + MOVES[joint])
            captured = np.all(new_pred == prey[:, None, :], axis=(1, 2))
            branches = []
            for prey_next in moved_prey:
                shaping = 0.0
                if self.distance_shaping:
                    shaping = -self.distance_shaping * self._mean_distance(new_pred, prey_next[:, None, :])
                branches.append((encode(new_pred, prey_next), shaping))
            outcomes.append((captured, branches))

        value = np.zeros(n_states)
        best_case = np.zeros(n_states)
        greedy = np.zeros(n_states, dtype=np.int64)
        for _ in range(limit):
            q_expected = np.empty((len(joints), n_states))
            q_best = np.empty((len(joints), n_states))
            for j, (captured, branches) in enumerate(outcomes):
                expected = np.zeros(n_states)
                luckiest = np.full(n_states, -np.inf)
                for nxt, shaping in branches:
                    expected += (shaping + gamma * value[nxt]) / len(branches)
                    luckiest = np.maximum(luckiest, shaping + gamma * best_case[nxt])
                q_expected[j] = np.where(captured, self.capture_reward, expected)
                q_best[j] = np.where(captured, self.capture_reward, luckiest)
            greedy = np.argmax(q_expected, axis=0)
            value = q_expected.max(axis=0)
            best_case = q_best.max(axis=0)

        start = ~np.all(predators == prey[:, None, :], axis=(1, 2))
        logger.info("[oracle] predator_prey states=%s horizon=%s", n_states, limit)
        state_values = {
            tuple(float(v) for v in np.concatenate([xy[s, :n].reshape(-1), xy[s, n]])): float(value[s])
            for s in np.flatnonzero(start)
        }
        policy = {
            tuple(float(v) for v in np.concatenate([xy[s, :n].reshape(-1), xy[s, n]])): tuple(int(a) for a in joints[greedy[s]])
            for s in np.flatnonzero(start)
        }
        return OracleResult(
            optimal_discounted_return=float(value[start].mean()),
            best_case_return=float(best_case[start].max()),
            optimal_joint_policy=policy,
            state_values=state_values,
        )
