from __future__ import annotations

import numpy as np
import pytest

from app.core.errors import EpisodeOver, InvalidAction, OracleInfeasible
from app.envs import CLIMBING_PAYOFF, LeverCoordination, MatrixGame, PredatorPreyGrid, make_env
from app.envs.base import joint_actions, oracle_optimal_return, reset, step
from app.envs.predator_prey import MOVES


def discounted(rewards, gamma):
    return sum(r * gamma**t for t, r in enumerate(rewards))


def test_matrix_game_rewards():
    env = MatrixGame(CLIMBING_PAYOFF)
    state, obs = reset(env, 0)
    assert state.tolist() == [0.0] and obs.tolist() == [[1.0], [1.0]]
    result = step(env, (0, 0))
    assert result.reward == 11.0 and result.terminated and result.success and not result.truncated
    reset(env, 1)
    assert step(env, (0, 1)).reward == -30.0


def test_step_errors():
    env = MatrixGame()
    env.reset(0)
    with pytest.raises(InvalidAction):
        env.step((0, 3))
    with pytest.raises(InvalidAction):
        env.step((0,))
    env.step((2, 2))
    with pytest.raises(EpisodeOver):
        env.step((0, 0))


def test_matrix_oracle():
    result = oracle_optimal_return(MatrixGame())
    assert result.optimal_discounted_return == 11.0
    assert result.optimal_joint_policy == {(): (0, 0)}
    with pytest.raises(ValueError):
        MatrixGame([[1.0, 2.0]])


def test_lever_oracle_and_coordination():
    env = LeverCoordination(n_agents=2, n_levers=3, episode_limit=5)
    assert env.oracle_optimal_return(0.99).optimal_discounted_return == 1.0
    env.reset(4)
    correct = env.correct
    wrong = (correct + 1) % 3
    miss = env.step((correct, wrong))
    assert miss.reward == 0.0 and not miss.terminated
    hit = env.step((correct, correct))
    assert hit.reward == 1.0 and hit.terminated and hit.success


def test_lever_truncates_at_limit():
    env = LeverCoordination(episode_limit=3)
    env.reset(0)
    wrong = (env.correct + 1) % 3
    results = [env.step((wrong, wrong)) for _ in range(3)]
    assert [r.terminated for r in results] == [False, False, True]
    assert results[-1].truncated


def test_lever_observations_identity_and_cue():
    env = LeverCoordination(n_agents=3, n_levers=4, cue_noise=0.0)
    _, obs = env.reset(2)
    assert obs.shape == (3, 7)
    assert obs[:, :3].tolist() == np.eye(3).tolist()
    # noiseless cue points at the correct lever
    assert np.all(np.argmax(obs[:, 3:], axis=1) == env.correct)


def test_predator_prey_reset_determinism():
    env = PredatorPreyGrid()
    first = env.reset(17)[0]
    assert env.reset(17)[0].tolist() == first.tolist()
    differing = 0
    for s in range(100):
        a = env.reset(2 * s)[0]
        b = env.reset(2 * s + 1)[0]
        differing += int(not np.array_equal(a, b))
    assert differing > 0


def test_predator_prey_capture():
    env = PredatorPreyGrid(width=4, height=4, n_predators=2)
    env.reset(0)
    env.prey = np.array([1, 1])
    env.predators = np.array([[1, 0], [0, 1]])
    # predator 0 moves down, predator 1 moves right
    result = env.step((2, 4))
    assert result.reward == 10.0 and result.terminated and result.success


def test_predator_prey_episode_limit_and_sharing():
    env = PredatorPreyGrid(episode_limit=7)
    env.reset(3)
    rng = np.random.default_rng(0)
    length = 0
    while not env.done:
        result = env.step(tuple(int(a) for a in rng.integers(len(MOVES), size=2)))
        assert isinstance(result.reward, float)
        length += 1
    assert length <= 7


def test_predator_prey_same_actions_same_trajectory():
    def trajectory(seed):
        env = PredatorPreyGrid()
        env.reset(seed)
        rng = np.random.default_rng(99)
        states = []
        while not env.done:
            states.append(env.step(tuple(int(a) for a in rng.integers(5, size=2))).state.tolist())
        return states

    assert trajectory(5) == trajectory(5)


def test_predator_prey_oracle_dominates_rollouts():
    gamma = 0.99
    env = PredatorPreyGrid()
    oracle = env.oracle_optimal_return(gamma)
    assert 0.0 < oracle.optimal_discounted_return <= oracle.best_case_return <= 10.0
    rng = np.random.default_rng(1)
    for episode in range(100):
        state, _ = env.reset(episode)
        start_value = oracle.value_of(tuple(float(v) for v in state))
        assert start_value <= oracle.best_case_return + 1e-9
        rewards = []
        while not env.done:
            rewards.append(env.step(tuple(int(a) for a in rng.integers(5, size=2))).reward)
        assert discounted(rewards, gamma) <= oracle.best_case_return + 1e-9


def test_oracle_cap():
    with pytest.raises(OracleInfeasible):
        PredatorPreyGrid(width=10, height=10, n_predators=2).oracle_optimal_return(0.99)


def test_joint_actions_lexicographic():
    joints = joint_actions(2, 3)
    assert joints.shape == (9, 2)
    assert joints[:4].tolist() == [[0, 0], [0, 1], [0, 2], [1, 0]]


def test_make_env_registry():
    env = make_env("matrix_game", {"payoff": [[1, 0], [0, 1]]})
    assert env.spec.n_actions == 2
    assert make_env("lever_coordination").recurrent_agents
    with pytest.raises(ValueError):
        make_env("smac")
