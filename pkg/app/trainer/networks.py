"""Shared agent network: [obs | agent id | last action] -> encoder -> (GRU) -> per-action utilities.

All agents share one set of weights; the one-hot agent id lets them differ.
Batched tensors are laid out (B, T+1, n, ...) like ``PaddedBatch``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from app.core.replay import PaddedBatch
from app.neural import GradBuffer, ParameterSet, init_gru, init_mlp, mlp_backward, mlp_forward
from app.neural.layers import GruCache, MlpCache, gru_backward, gru_forward

ENCODER = "agent.encoder"
RNN = "agent.rnn"
HEAD = "agent.head"


def input_dim(obs_dim: int, n_agents: int, n_actions: int, recurrent: bool) -> int:
    return obs_dim + n_agents + (n_actions if recurrent else 0)


def init_agent(
    params: ParameterSet,
    in_dim: int,
    n_actions: int,
    rng: np.random.Generator,
    hidden_dim: int = 64,
    recurrent: bool = False,
) -> None:
    init_mlp(params, ENCODER, [in_dim, hidden_dim, hidden_dim], rng)
    if recurrent:
        init_gru(params, RNN, hidden_dim, hidden_dim, rng)
    init_mlp(params, HEAD, [hidden_dim, n_actions], rng)


def is_recurrent(params: ParameterSet) -> bool:
    return f"{RNN}.w_ir" in params


def _one_hot(actions: np.ndarray, n_actions: int) -> np.ndarray:
    # -1 encodes "no previous action" and maps to the zero vector
    return np.eye(n_actions + 1)[np.asarray(actions, dtype=np.int64) + 1][..., 1:]


def agent_inputs(
    observations: np.ndarray, last_actions: Optional[np.ndarray], n_actions: int
) -> np.ndarray:
    """observations (..., n, d), last_actions (..., n) or None -> (..., n, in_dim)."""
    observations = np.asarray(observations, dtype=np.float64)
    n_agents = observations.shape[-2]
    ids = np.broadcast_to(np.eye(n_agents), observations.shape[:-1] + (n_agents,))
    parts = [observations, ids]
    if last_actions is not None:
        parts.append(_one_hot(last_actions, n_actions))
    return np.concatenate(parts, axis=-1)


def batch_inputs(batch: PaddedBatch, n_actions: int, recurrent: bool) -> np.ndarray:
    last_actions = None
    if recurrent:
        b, horizon, n_agents = batch.actions.shape
        last_actions = np.full((b, horizon + 1, n_agents), -1, dtype=np.int64)
        last_actions[:, 1:] = batch.actions
    return agent_inputs(batch.observations, last_actions, n_actions)


@dataclass
class AgentCache:
    shape: Tuple[int, int, int]
    encoder: MlpCache
    head: MlpCache
    cells: List[GruCache] = field(default_factory=list)


def agent_forward(params: ParameterSet, inputs: np.ndarray) -> Tuple[np.ndarray, AgentCache]:
    """inputs (B, T1, n, in_dim) -> utilities (B, T1, n, U); the GRU runs along T1 from a zero state."""
    b, horizon, n_agents, in_dim = inputs.shape
    encoded, encoder_cache = mlp_forward(params, ENCODER, inputs.reshape(-1, in_dim), activate_last=True)
    cells: List[GruCache] = []
    features = encoded
    if is_recurrent(params):
        hidden_dim = encoded.shape[-1]
        steps = encoded.reshape(b, horizon, n_agents, hidden_dim)
        h = np.zeros((b * n_agents, hidden_dim))
        outputs = np.empty_like(steps)
        for t in range(horizon):
            h, cell = gru_forward(params, RNN, steps[:, t].reshape(b * n_agents, hidden_dim), h)
            cells.append(cell)
            outputs[:, t] = h.reshape(b, n_agents, hidden_dim)
        features = outputs.reshape(-1, hidden_dim)
    q, head_cache = mlp_forward(params, HEAD, features)
    return q.reshape(b, horizon, n_agents, -1), AgentCache((b, horizon, n_agents), encoder_cache, head_cache, cells)


def agent_backward(params: ParameterSet, cache: AgentCache, d_q: np.ndarray, grads: GradBuffer) -> None:
    b, horizon, n_agents = cache.shape
    d_features = mlp_backward(params, cache.head, d_q.reshape(b * horizon * n_agents, -1), grads)
    if cache.cells:
        hidden_dim = d_features.shape[-1]
        d_steps = d_features.reshape(b, horizon, n_agents, hidden_dim)
        d_encoded = np.empty_like(d_steps)
        d_h = np.zeros((b * n_agents, hidden_dim))
        for t in range(horizon - 1, -1, -1):
            d_x, d_h = gru_backward(params, cache.cells[t], d_steps[:, t].reshape(b * n_agents, hidden_dim) + d_h, grads)
            d_encoded[:, t] = d_x.reshape(b, n_agents, hidden_dim)
        d_features = d_encoded.reshape(-1, hidden_dim)
    mlp_backward(params, cache.encoder, d_features, grads)


def agent_step(
    params: ParameterSet, inputs: np.ndarray, hidden: Optional[np.ndarray]
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """One decentralized step for all agents: inputs (n, in_dim) -> (utilities (n, U), next hidden)."""
    features, _ = mlp_forward(params, ENCODER, inputs, activate_last=True)
    if is_recurrent(params):
        if hidden is None:
            hidden = np.zeros_like(features)
        hidden, _ = gru_forward(params, RNN, features, hidden)
        features = hidden
    q, _ = mlp_forward(params, HEAD, features)
    return q, hidden
