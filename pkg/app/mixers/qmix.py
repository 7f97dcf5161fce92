"""Monotonic mixing: a two-layer network whose weights are produced from the
global state by hypernetworks and forced non-negative by an absolute value."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from app.core.errors import ShapeError
from app.neural import GradBuffer, ParameterSet, elu, elu_grad, init_mlp, mlp_backward, mlp_forward
from app.neural.layers import MlpCache

PREFIX = "mixer"


def init_qmix(
    params: ParameterSet,
    n_agents: int,
    state_dim: int,
    rng: np.random.Generator,
    embed_dim: int = 32,
) -> None:
    init_mlp(params, f"{PREFIX}.hyper_w1", [state_dim, n_agents * embed_dim], rng)
    init_mlp(params, f"{PREFIX}.hyper_b1", [state_dim, embed_dim], rng)
    init_mlp(params, f"{PREFIX}.hyper_w2", [state_dim, embed_dim], rng)
    init_mlp(params, f"{PREFIX}.hyper_v", [state_dim, embed_dim, 1], rng)


@dataclass
class QmixCache:
    chosen_q: np.ndarray
    a1: np.ndarray
    w1: np.ndarray
    a2: np.ndarray
    w2: np.ndarray
    hidden_pre: np.ndarray
    hidden: np.ndarray
    w1_cache: MlpCache
    b1_cache: MlpCache
    w2_cache: MlpCache
    v_cache: MlpCache


def qmix_mix(params: ParameterSet, chosen_q: np.ndarray, state: np.ndarray) -> Tuple[np.ndarray, QmixCache]:
    chosen_q = np.asarray(chosen_q, dtype=np.float64)
    state = np.asarray(state, dtype=np.float64)
    if chosen_q.ndim != 2 or state.ndim != 2 or chosen_q.shape[0] != state.shape[0]:
        raise ShapeError(f"qmix expects (N, n) utilities and (N, F) states, got {chosen_q.shape} and {state.shape}")
    batch, n_agents = chosen_q.shape

    a1, w1_cache = mlp_forward(params, f"{PREFIX}.hyper_w1", state)
    if a1.shape[1] % n_agents:
        raise ShapeError(f"hypernetwork width {a1.shape[1]} does not split over {n_agents} agents")
    a1 = a1.reshape(batch, n_agents, -1)
    w1 = np.abs(a1)
    b1, b1_cache = mlp_forward(params, f"{PREFIX}.hyper_b1", state)
    hidden_pre = np.einsum("ni,nie->ne", chosen_q, w1) + b1
    hidden = elu(hidden_pre)

    a2, w2_cache = mlp_forward(params, f"{PREFIX}.hyper_w2", state)
    w2 = np.abs(a2)
    v, v_cache = mlp_forward(params, f"{PREFIX}.hyper_v", state)

    q_tot = np.sum(hidden * w2, axis=1) + v[:, 0]
    cache = QmixCache(chosen_q, a1, w1, a2, w2, hidden_pre, hidden, w1_cache, b1_cache, w2_cache, v_cache)
    return q_tot, cache


def qmix_backward(params: ParameterSet, cache: QmixCache, upstream: np.ndarray, grads: GradBuffer) -> np.ndarray:
    """Accumulates hypernetwork gradients; returns dQ_tot/dQ_a weighted by ``upstream``, shape (N, n)."""
    g = np.asarray(upstream, dtype=np.float64)[:, None]
    d_hidden = g * cache.w2
    d_a2 = g * cache.hidden * np.sign(cache.a2)
    mlp_backward(params, cache.w2_cache, d_a2, grads)
    mlp_backward(params, cache.v_cache, g, grads)

    d_pre = d_hidden * elu_grad(cache.hidden_pre)
    mlp_backward(params, cache.b1_cache, d_pre, grads)
    d_a1 = cache.chosen_q[:, :, None] * d_pre[:, None, :] * np.sign(cache.a1)
    mlp_backward(params, cache.w1_cache, d_a1.reshape(d_a1.shape[0], -1), grads)
    return np.einsum("nie,ne->ni", cache.w1, d_pre)
