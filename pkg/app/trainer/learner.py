"""Targets and losses over a padded batch.

Every loss here is an unnormalized masked sum over (b, t). The ``*_terms``
functions work on plain arrays; ``loss_em`` and ``loss_wqmix_em`` run the
networks forward and backward and return ``(loss, grads)`` so they can be
handed straight to ``grad_check``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Optional, Tuple

import numpy as np

from app.core.errors import NumericsError
from app.core.replay import PaddedBatch
from app.memory import SaemTable, StateKeyer, TargetBatch, saem_targets, sem_targets
from app.memory.tables import EpisodicTable
from app.mixers import MixerKind, central_critic, central_critic_backward, cw_weights, joint_argmax, mix, mix_backward
from app.neural import GradBuffer, ParameterSet

from .config import MemoryMode
from .networks import AgentCache, agent_backward, agent_forward, batch_inputs

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LearnerSpec:
    mixer: MixerKind
    n_agents: int
    n_actions: int
    state_dim: int
    recurrent: bool


@dataclass
class TakenForward:
    all_q: np.ndarray  # (B, T+1, n, U)
    q_tot: np.ndarray  # (B, T)
    agent_cache: AgentCache
    mixer_cache: Any


def forward_taken(spec: LearnerSpec, params: ParameterSet, batch: PaddedBatch) -> TakenForward:
    """Q_tot(tau_t, u_t) for the actions actually taken."""
    all_q, agent_cache = agent_forward(params, batch_inputs(batch, spec.n_actions, spec.recurrent))
    b, horizon = batch.rewards.shape
    chosen = np.take_along_axis(all_q[:, :-1], batch.actions[..., None], axis=-1)[..., 0]
    q_tot, mixer_cache = mix(
        spec.mixer,
        params,
        chosen.reshape(b * horizon, spec.n_agents),
        batch.states[:, :-1].reshape(b * horizon, spec.state_dim),
    )
    return TakenForward(all_q, q_tot.reshape(b, horizon), agent_cache, mixer_cache)


def backward_taken(
    spec: LearnerSpec, params: ParameterSet, batch: PaddedBatch, fwd: TakenForward, d_q_tot: np.ndarray, grads: GradBuffer
) -> None:
    b, horizon = batch.rewards.shape
    d_chosen = mix_backward(spec.mixer, params, fwd.mixer_cache, d_q_tot.reshape(-1), grads)
    d_q = np.zeros_like(fwd.all_q)
    np.put_along_axis(d_q[:, :-1], batch.actions[..., None], d_chosen.reshape(b, horizon, spec.n_agents, 1), axis=-1)
    agent_backward(params, fwd.agent_cache, d_q, grads)


def _critic_values(
    spec: LearnerSpec, params: ParameterSet, states: np.ndarray, actions: np.ndarray
) -> Tuple[np.ndarray, Any]:
    b, horizon = actions.shape[:2]
    values, cache = central_critic(
        params, states.reshape(b * horizon, spec.state_dim), actions.reshape(b * horizon, spec.n_agents), spec.n_actions
    )
    return values.reshape(b, horizon), cache


@dataclass
class Targets:
    y: np.ndarray  # (B, T), zero on padding
    e: np.ndarray  # target paired with lambda in the loss
    e_s: Optional[np.ndarray] = None
    e_su: Optional[np.ndarray] = None
    sem: Optional[TargetBatch] = None
    saem: Optional[TargetBatch] = None


def bootstrap_values(spec: LearnerSpec, target_params: ParameterSet, batch: PaddedBatch) -> np.ndarray:
    """max_u Q_tot(tau', u; theta-) per step, or Q*(s', u*') through the central critic for WQMIX."""
    all_q, _ = agent_forward(target_params, batch_inputs(batch, spec.n_actions, spec.recurrent))
    greedy_next = joint_argmax(all_q[:, 1:], spec.mixer)
    if spec.mixer is MixerKind.wqmix:
        values, _ = _critic_values(spec, target_params, batch.states[:, 1:], greedy_next)
        return values
    b, horizon = batch.rewards.shape
    chosen = np.take_along_axis(all_q[:, 1:], greedy_next[..., None], axis=-1)[..., 0]
    q_next, _ = mix(
        spec.mixer,
        target_params,
        chosen.reshape(b * horizon, spec.n_agents),
        batch.states[:, 1:].reshape(b * horizon, spec.state_dim),
    )
    return q_next.reshape(b, horizon)


def compute_targets(
    spec: LearnerSpec,
    batch: PaddedBatch,
    target_params: ParameterSet,
    gamma: float,
    memory: MemoryMode,
    keyer: Optional[StateKeyer] = None,
    sem_table: Optional[EpisodicTable] = None,
    saem_table: Optional[SaemTable] = None,
) -> Targets:
    """Vanilla y plus whichever EM targets the available tables can produce.

    Terminal steps drop the bootstrap in both y and E_s; SEM misses use the
    vanilla bootstrap and SAEM misses take y itself. Every lookup counts as a
    table access.
    """
    memory = MemoryMode(memory)
    bootstrap = bootstrap_values(spec, target_params, batch)
    y = (batch.rewards + gamma * (1.0 - batch.terminals) * bootstrap) * batch.mask
    targets = Targets(y=y, e=y)
    if sem_table is not None and keyer is not None:
        sem = sem_targets(
            batch.rewards,
            keyer.keys(batch.states[:, 1:]),
            gamma,
            sem_table,
            bootstrap,
            batch.terminals,
            batch.mask,
        )
        targets.sem, targets.e_s = sem, sem.values
    if saem_table is not None and keyer is not None:
        joint = [tuple(int(a) for a in row) for row in batch.actions.reshape(-1, spec.n_agents)]
        saem = saem_targets(keyer.keys(batch.states[:, :-1]), joint, saem_table, y, batch.mask)
        targets.saem, targets.e_su = saem, saem.values
    if memory is MemoryMode.sem and targets.e_s is not None:
        targets.e = targets.e_s
    elif memory is MemoryMode.saem and targets.e_su is not None:
        targets.e = targets.e_su
    return targets


def _finite(loss: float, what: str) -> float:
    if not np.isfinite(loss):
        raise NumericsError(f"non-finite {what} loss")
    return float(loss)


def td_loss_terms(q_tot: np.ndarray, y: np.ndarray, mask: np.ndarray) -> Tuple[float, np.ndarray]:
    diff = q_tot - y
    return _finite(np.sum(mask * diff**2), "td"), 2.0 * mask * diff


def em_loss_terms(
    q_tot: np.ndarray, y: np.ndarray, e: np.ndarray, lam: float, mask: np.ndarray
) -> Tuple[float, np.ndarray]:
    """sum mask * [(1 - lam)(Q_tot - y)^2 + lam (Q_tot - E)^2] and its gradient in Q_tot."""
    diff_y = q_tot - y
    diff_e = q_tot - e
    loss = np.sum(mask * ((1.0 - lam) * diff_y**2 + lam * diff_e**2))
    return _finite(loss, "em"), 2.0 * mask * ((1.0 - lam) * diff_y + lam * diff_e)


def wqmix_loss_terms(
    q_tot: np.ndarray, q_hat: np.ndarray, y: np.ndarray, w: np.ndarray, mask: np.ndarray
) -> Tuple[float, np.ndarray, np.ndarray]:
    diff = q_tot - y
    critic = q_hat - y
    loss = np.sum(mask * (w * diff**2 + critic**2))
    return _finite(loss, "wqmix"), 2.0 * mask * w * diff, 2.0 * mask * critic


def wqmix_em_terms(
    q_tot: np.ndarray,
    q_hat: np.ndarray,
    y: np.ndarray,
    e: np.ndarray,
    w: np.ndarray,
    w_e: np.ndarray,
    lam: float,
    mask: np.ndarray,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Weighted restricted-mixer terms against y and E plus unweighted critic terms against both."""
    diff_y, diff_e = q_tot - y, q_tot - e
    critic_y, critic_e = q_hat - y, q_hat - e
    loss = np.sum(
        mask
        * (
            (1.0 - lam) * w * diff_y**2
            + lam * w_e * diff_e**2
            + (1.0 - lam) * critic_y**2
            + lam * critic_e**2
        )
    )
    d_q_tot = 2.0 * mask * ((1.0 - lam) * w * diff_y + lam * w_e * diff_e)
    d_q_hat = 2.0 * mask * ((1.0 - lam) * critic_y + lam * critic_e)
    return _finite(loss, "wqmix-em"), d_q_tot, d_q_hat


def loss_em(
    spec: LearnerSpec,
    params: ParameterSet,
    batch: PaddedBatch,
    y: np.ndarray,
    e: np.ndarray,
    lam: float,
) -> Tuple[float, GradBuffer]:
    fwd = forward_taken(spec, params, batch)
    loss, d_q_tot = em_loss_terms(fwd.q_tot, y, e, lam, batch.mask)
    grads = params.zeros_like()
    backward_taken(spec, params, batch, fwd, d_q_tot, grads)
    return loss, grads


@dataclass
class WqmixWeights:
    w: np.ndarray
    w_e: np.ndarray


def central_weights(
    spec: LearnerSpec,
    params: ParameterSet,
    batch: PaddedBatch,
    all_q: np.ndarray,
    y: np.ndarray,
    e: np.ndarray,
    alpha: float,
) -> WqmixWeights:
    """w and w_e per step; Q*(s, u*) is read with the current critic and carries no gradient."""
    greedy = joint_argmax(all_q[:, :-1], spec.mixer)
    q_hat_star, _ = _critic_values(spec, params, batch.states[:, :-1], greedy)
    return WqmixWeights(
        w=cw_weights(y, q_hat_star, batch.actions, greedy, alpha),
        w_e=cw_weights(e, q_hat_star, batch.actions, greedy, alpha),
    )


def loss_wqmix_em(
    spec: LearnerSpec,
    params: ParameterSet,
    batch: PaddedBatch,
    y: np.ndarray,
    e: np.ndarray,
    lam: float,
    alpha: float,
    unit_weights: bool = False,
) -> Tuple[float, GradBuffer]:
    fwd = forward_taken(spec, params, batch)
    q_hat, critic_cache = _critic_values(spec, params, batch.states[:, :-1], batch.actions)
    if unit_weights:
        weights = WqmixWeights(np.ones_like(y), np.ones_like(y))
    else:
        weights = central_weights(spec, params, batch, fwd.all_q, y, e, alpha)
    loss, d_q_tot, d_q_hat = wqmix_em_terms(fwd.q_tot, q_hat, y, e, weights.w, weights.w_e, lam, batch.mask)
    grads = params.zeros_like()
    backward_taken(spec, params, batch, fwd, d_q_tot, grads)
    central_critic_backward(params, critic_cache, d_q_hat.reshape(-1), grads)
    return loss, grads


def training_loss(
    spec: LearnerSpec,
    params: ParameterSet,
    batch: PaddedBatch,
    targets: Targets,
    lam: float,
    alpha: float,
) -> Tuple[float, GradBuffer]:
    if spec.mixer is MixerKind.wqmix:
        return loss_wqmix_em(spec, params, batch, targets.y, targets.e, lam, alpha)
    return loss_em(spec, params, batch, targets.y, targets.e, lam)
