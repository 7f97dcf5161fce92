"""Episodic-memory targets: E_s = r + gamma * Q^S(s') and E_s^u = Q^SA(s, u)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

import numpy as np

from app.memory.tables import EpisodicTable, JointAction, SaemTable


def sem_target(
    reward: float,
    next_key: Optional[Hashable],
    gamma: float,
    table: EpisodicTable,
    fallback: float,
    terminal: bool = False,
) -> float:
    if terminal:
        return float(reward)
    stored = table.lookup(next_key)
    bootstrap = fallback if stored is None else stored
    return float(reward + gamma * bootstrap)


def saem_target(key: Hashable, joint_action: JointAction, tables: SaemTable) -> Optional[float]:
    """``None`` on a miss; the caller substitutes the vanilla target."""
    return tables.lookup(key, joint_action)


@dataclass
class TargetBatch:
    values: np.ndarray  # same shape as the rewards it was built from
    hits: int
    misses: int

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0


def sem_targets(
    rewards: np.ndarray,
    next_keys: Sequence[Hashable],
    gamma: float,
    table: EpisodicTable,
    fallbacks: np.ndarray,
    terminals: np.ndarray,
    mask: np.ndarray,
) -> TargetBatch:
    """Flat C-order walk over (B, T) arrays; padded steps are skipped and left at 0."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.zeros_like(rewards)
    hits = misses = 0
    flat_r, flat_f = rewards.reshape(-1), np.asarray(fallbacks, dtype=np.float64).reshape(-1)
    flat_term, flat_mask = np.asarray(terminals).reshape(-1), np.asarray(mask).reshape(-1)
    out = values.reshape(-1)
    for i, key in enumerate(next_keys):
        if not flat_mask[i]:
            continue
        if flat_term[i]:
            out[i] = flat_r[i]
            continue
        stored = table.lookup(key)
        if stored is None:
            misses += 1
            out[i] = flat_r[i] + gamma * flat_f[i]
        else:
            hits += 1
            out[i] = flat_r[i] + gamma * stored
    return TargetBatch(values, hits, misses)


def saem_targets(
    keys: Sequence[Hashable],
    joint_actions: Sequence[JointAction],
    tables: SaemTable,
    fallbacks: np.ndarray,
    mask: np.ndarray,
) -> TargetBatch:
    """Misses take the matching fallback (the vanilla target y)."""
    fallbacks = np.asarray(fallbacks, dtype=np.float64)
    values = np.zeros_like(fallbacks)
    out, flat_f, flat_mask = values.reshape(-1), fallbacks.reshape(-1), np.asarray(mask).reshape(-1)
    hits = misses = 0
    for i, (key, joint_action) in enumerate(zip(keys, joint_actions)):
        if not flat_mask[i]:
            continue
        stored = tables.lookup(key, joint_action)
        if stored is None:
            misses += 1
            out[i] = flat_f[i]
        else:
            hits += 1
            out[i] = stored
    return TargetBatch(values, hits, misses)
