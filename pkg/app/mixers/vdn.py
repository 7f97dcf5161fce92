from __future__ import annotations

import numpy as np


def vdn_mix(chosen_q: np.ndarray) -> np.ndarray:
    """Q_tot = sum_a Q_a; ``chosen_q`` is (batch, n_agents) or (n_agents,)."""
    chosen_q = np.asarray(chosen_q, dtype=np.float64)
    if chosen_q.shape[-1] < 1:
        raise ValueError("VDN needs at least one agent")
    return chosen_q.sum(axis=-1)


def vdn_backward(upstream: np.ndarray, n_agents: int) -> np.ndarray:
    return np.repeat(np.asarray(upstream, dtype=np.float64)[..., None], n_agents, axis=-1)
