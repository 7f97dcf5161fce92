"""Weighted QMIX pieces: the unrestricted central critic and the
centrally-weighting functions for the vanilla and episodic-memory targets."""
from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from app.core.errors import ShapeError
from app.neural import GradBuffer, ParameterSet, init_mlp, mlp_backward, mlp_forward
from app.neural.layers import MlpCache

PREFIX = "critic"
DEFAULT_ALPHA = 0.75


def init_central_critic(
    params: ParameterSet,
    state_dim: int,
    n_agents: int,
    n_actions: int,
    rng: np.random.Generator,
    hidden_dim: int = 64,
) -> None:
    init_mlp(params, PREFIX, [state_dim + n_agents * n_actions, hidden_dim, hidden_dim, 1], rng)


def critic_inputs(state: np.ndarray, joint_action: np.ndarray, n_actions: int) -> np.ndarray:
    """[state | one-hot(u^1) | ... | one-hot(u^n)]."""
    joint_action = np.asarray(joint_action, dtype=np.int64)
    if joint_action.ndim != 2 or state.ndim != 2 or joint_action.shape[0] != state.shape[0]:
        raise ShapeError(f"critic expects (N, F) states and (N, n) actions, got {state.shape} and {joint_action.shape}")
    if np.any(joint_action < 0) or np.any(joint_action >= n_actions):
        raise ShapeError(f"joint actions must lie in [0, {n_actions})")
    one_hot = np.eye(n_actions)[joint_action].reshape(joint_action.shape[0], -1)
    return np.concatenate([np.asarray(state, dtype=np.float64), one_hot], axis=1)


def central_critic(
    params: ParameterSet, state: np.ndarray, joint_action: np.ndarray, n_actions: int
) -> Tuple[np.ndarray, MlpCache]:
    out, cache = mlp_forward(params, PREFIX, critic_inputs(state, joint_action, n_actions))
    return out[:, 0], cache


def central_critic_backward(params: ParameterSet, cache: MlpCache, upstream: np.ndarray, grads: GradBuffer) -> None:
    mlp_backward(params, cache, np.asarray(upstream, dtype=np.float64)[:, None], grads)


def wqmix_weight(
    y: float, qhat_at_ustar: float, u: Sequence[int], u_star: Sequence[int], alpha: float = DEFAULT_ALPHA
) -> float:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if y > qhat_at_ustar or tuple(u) == tuple(u_star):
        return 1.0
    return alpha


def wqmix_em_weight(
    e: float, qhat_at_ustar: float, u: Sequence[int], u_star: Sequence[int], alpha: float = DEFAULT_ALPHA
) -> float:
    return wqmix_weight(e, qhat_at_ustar, u, u_star, alpha)


def cw_weights(
    targets: np.ndarray, qhat_at_ustar: np.ndarray, actions: np.ndarray, u_star: np.ndarray, alpha: float
) -> np.ndarray:
    """Vectorized centrally-weighting function over a batch of steps."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    greedy = np.all(np.asarray(actions) == np.asarray(u_star), axis=-1)
    return np.where((targets > qhat_at_ustar) | greedy, 1.0, alpha)
