from __future__ import annotations

from enum import Enum
from typing import Any, Optional, Tuple

import numpy as np

from app.neural import GradBuffer, ParameterSet
from .qmix import init_qmix, qmix_backward, qmix_mix
from .vdn import vdn_backward, vdn_mix
from .wqmix import (
    DEFAULT_ALPHA,
    central_critic,
    central_critic_backward,
    cw_weights,
    init_central_critic,
    wqmix_em_weight,
    wqmix_weight,
)


class MixerKind(str, Enum):
    vdn = "vdn"
    qmix = "qmix"
    wqmix = "wqmix"


def init_mixer(
    kind: MixerKind,
    params: ParameterSet,
    n_agents: int,
    n_actions: int,
    state_dim: int,
    rng: np.random.Generator,
    embed_dim: int = 32,
    critic_hidden: int = 64,
) -> None:
    kind = MixerKind(kind)
    if kind in (MixerKind.qmix, MixerKind.wqmix):
        # WQMIX keeps QMIX as its restricted (monotonic) mixer
        init_qmix(params, n_agents, state_dim, rng, embed_dim=embed_dim)
    if kind is MixerKind.wqmix:
        init_central_critic(params, state_dim, n_agents, n_actions, rng, hidden_dim=critic_hidden)


def mix(kind: MixerKind, params: ParameterSet, chosen_q: np.ndarray, state: np.ndarray) -> Tuple[np.ndarray, Any]:
    if MixerKind(kind) is MixerKind.vdn:
        return vdn_mix(chosen_q), chosen_q.shape[-1]
    return qmix_mix(params, chosen_q, state)


def mix_backward(kind: MixerKind, params: ParameterSet, cache: Any, upstream: np.ndarray, grads: GradBuffer) -> np.ndarray:
    if MixerKind(kind) is MixerKind.vdn:
        return vdn_backward(upstream, cache)
    return qmix_backward(params, cache, upstream, grads)


def joint_argmax(
    all_q: np.ndarray,
    mixer: MixerKind = MixerKind.vdn,
    state: Optional[np.ndarray] = None,
    params: Optional[ParameterSet] = None,
) -> np.ndarray:
    """Greedy joint action of a monotonic decomposition.

    Additive and monotonic mixers satisfy IGM, so the per-agent argmax tuple
    maximizes Q_tot for every state; ``state`` and ``params`` are accepted for
    interface symmetry and unused. Ties go to the lowest action index.
    """
    MixerKind(mixer)
    return np.argmax(np.asarray(all_q), axis=-1)


__all__ = [
    "DEFAULT_ALPHA",
    "MixerKind",
    "central_critic",
    "central_critic_backward",
    "cw_weights",
    "init_central_critic",
    "init_mixer",
    "init_qmix",
    "joint_argmax",
    "mix",
    "mix_backward",
    "qmix_backward",
    "qmix_mix",
    "vdn_backward",
    "vdn_mix",
    "wqmix_em_weight",
    "wqmix_weight",
]
