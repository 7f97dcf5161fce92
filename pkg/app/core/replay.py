"""Episode replay: discounted returns, the FIFO episode buffer H, padding and the epsilon schedule."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Deque, Iterable, List, Sequence

import numpy as np

from .errors import EmptyEpisode, NotReady
from .models import Episode, EpsilonSchedule

logger = logging.getLogger(__name__)


def discounted_returns(rewards: Sequence[float], gamma: float) -> np.ndarray:
    """R_t = r_t + gamma * R_{t+1}, with R_{T+1} = 0, in double precision."""
    if len(rewards) == 0:
        raise EmptyEpisode("cannot compute returns of an empty episode")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    values = np.asarray(rewards, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("rewards must be finite")
    out = np.empty_like(values)
    running = 0.0
    for t in range(len(values) - 1, -1, -1):
        running = values[t] + gamma * running
        out[t] = running
    return out


class ReplayBuffer:
    """Ring of whole episodes; the oldest one leaves first when full."""

    def __init__(self, capacity: int = 5000) -> None:
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.episodes: Deque[Episode] = deque(maxlen=capacity)

    def store(self, episode: Episode) -> None:
        self.episodes.append(episode)

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Episode]:
        if batch_size <= 0:
            raise ValueError("batch size must be positive")
        if len(self.episodes) < batch_size:
            raise NotReady(f"buffer holds {len(self.episodes)} episodes, {batch_size} requested")
        indices = rng.choice(len(self.episodes), size=batch_size, replace=False)
        return [self.episodes[int(i)] for i in indices]

    def can_sample(self, batch_size: int) -> bool:
        return len(self.episodes) >= batch_size

    def __len__(self) -> int:
        return len(self.episodes)


def buffer_store(buffer: ReplayBuffer, episode: Episode) -> ReplayBuffer:
    buffer.store(episode)
    return buffer


def buffer_sample(buffer: ReplayBuffer, batch_size: int, rng: np.random.Generator) -> List[Episode]:
    return buffer.sample(batch_size, rng)


def epsilon_at(step: int, schedule: EpsilonSchedule) -> float:
    if step <= 0:
        return schedule.start
    if step >= schedule.anneal_steps:
        return schedule.end
    fraction = step / schedule.anneal_steps
    return schedule.start + fraction * (schedule.end - schedule.start)


@dataclass
class PaddedBatch:
    """Episodes padded to the longest one in the batch.

    Time-indexed arrays carry one extra slot (index T) holding the state and
    observations reached after the last step, so bootstraps read index t+1.
    """

    observations: np.ndarray  # (B, T+1, n, obs_dim)
    states: np.ndarray  # (B, T+1, F)
    actions: np.ndarray  # (B, T, n) int
    rewards: np.ndarray  # (B, T)
    terminals: np.ndarray  # (B, T) 1.0 where the step ended the episode at a true terminal
    mask: np.ndarray  # (B, T) 1.0 on real steps
    lengths: np.ndarray  # (B,)

    @property
    def batch_size(self) -> int:
        return self.rewards.shape[0]

    @property
    def max_len(self) -> int:
        return self.rewards.shape[1]


def pad_batch(episodes: Iterable[Episode], pad_to: int | None = None) -> PaddedBatch:
    episodes = list(episodes)
    if not episodes:
        raise ValueError("pad_batch needs at least one episode")
    first = episodes[0]
    n_agents = first.n_agents
    obs_dim = first.transitions[0].observations.shape[-1]
    state_dim = first.transitions[0].global_state.shape[-1]
    lengths = np.array([len(ep) for ep in episodes], dtype=np.int64)
    horizon = int(lengths.max())
    if pad_to is not None:
        if pad_to < horizon:
            raise ValueError(f"pad_to={pad_to} is shorter than the longest episode ({horizon})")
        horizon = pad_to
    batch = len(episodes)

    observations = np.zeros((batch, horizon + 1, n_agents, obs_dim), dtype=np.float64)
    states = np.zeros((batch, horizon + 1, state_dim), dtype=np.float64)
    actions = np.zeros((batch, horizon, n_agents), dtype=np.int64)
    rewards = np.zeros((batch, horizon), dtype=np.float64)
    terminals = np.zeros((batch, horizon), dtype=np.float64)
    mask = np.zeros((batch, horizon), dtype=np.float64)

    for b, episode in enumerate(episodes):
        length = len(episode)
        for t, transition in enumerate(episode.transitions):
            observations[b, t] = transition.observations
            states[b, t] = transition.global_state
            actions[b, t] = transition.joint_action
            rewards[b, t] = transition.reward
            terminals[b, t] = 1.0 if transition.terminal else 0.0
        observations[b, length] = episode.final_observations
        states[b, length] = episode.final_state
        mask[b, :length] = 1.0

    return PaddedBatch(
        observations=observations,
        states=states,
        actions=actions,
        rewards=rewards,
        terminals=terminals,
        mask=mask,
        lengths=lengths,
    )
