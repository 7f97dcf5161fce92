"""Rollout, replay, episodic-memory bookkeeping and evaluation for one training run."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from app.core.models import Episode, MetricsRecord, Transition
from app.core.replay import ReplayBuffer, discounted_returns, epsilon_at, pad_batch
from app.envs import DecPOMDP, make_env
from app.memory import FlushStats, ReturnSet, SaemTable, SemTable, StateKeyer, flush_all
from app.mixers import init_mixer
from app.neural import ParameterSet, RmsPropState, clip_grad_norm, rmsprop_step, sync_target

from .config import MemoryMode, TrainerConfig
from .learner import LearnerSpec, Targets, compute_targets, training_loss
from .networks import agent_inputs, agent_step, init_agent, input_dim

logger = logging.getLogger(__name__)

RNG_STREAMS = ("env", "explore", "projection", "init", "sample", "eval")


def rng_streams(seed: int) -> Dict[str, np.random.Generator]:
    """Independent generators per concern, all derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(len(RNG_STREAMS))
    return {name: np.random.default_rng(child) for name, child in zip(RNG_STREAMS, children)}


@dataclass
class TrainState:
    config: TrainerConfig
    env: DecPOMDP
    eval_env: DecPOMDP
    spec: LearnerSpec
    keyer: StateKeyer
    params: ParameterSet
    target_params: ParameterSet
    optim: RmsPropState
    buffer: ReplayBuffer
    mset: ReturnSet
    sem_table: Optional[SemTable]
    saem_table: Optional[SaemTable]
    rngs: Dict[str, np.random.Generator]
    step: int = 0
    episode: int = 0
    updates: int = 0
    episodes_since_sync: int = 0
    sem_flushes: FlushStats = field(default_factory=FlushStats)
    saem_flushes: FlushStats = field(default_factory=FlushStats)
    flush_count: int = 0

    @property
    def primary_table(self) -> Optional[SemTable | SaemTable]:
        if self.config.memory is MemoryMode.saem:
            return self.saem_table
        return self.sem_table


def init_train_state(config: TrainerConfig) -> TrainState:
    env = make_env(config.env, config.env_params)
    eval_env = make_env(config.env, config.env_params)
    spec_env = env.spec
    recurrent = env.recurrent_agents if config.recurrent is None else config.recurrent
    spec = LearnerSpec(config.mixer, spec_env.n_agents, spec_env.n_actions, spec_env.state_dim, recurrent)
    rngs = rng_streams(config.seed)

    params = ParameterSet()
    init_agent(
        params,
        input_dim(spec_env.obs_dim, spec.n_agents, spec.n_actions, recurrent),
        spec.n_actions,
        rngs["init"],
        hidden_dim=config.hidden_dim,
        recurrent=recurrent,
    )
    init_mixer(
        config.mixer,
        params,
        spec.n_agents,
        spec.n_actions,
        spec.state_dim,
        rngs["init"],
        embed_dim=config.mixer_embed_dim,
        critic_hidden=config.critic_hidden_dim,
    )

    keyer = StateKeyer(
        spec.state_dim,
        projection_dim=config.projection_dim,
        quantization=config.quantization,
        use_projection=config.use_projection,
        seed=int(rngs["projection"].integers(0, 2**31 - 1)),
    )
    sem_table = None
    if config.memory is MemoryMode.sem or config.shadow:
        sem_table = SemTable(config.table_capacity)
    saem_table = SaemTable(config.table_capacity) if config.memory is MemoryMode.saem else None

    logger.info(
        "[train] env=%s mixer=%s memory=%s lambda=%s params=%s seed=%s",
        config.env,
        config.mixer.value,
        config.memory.value,
        config.effective_lambda,
        params.size,
        config.seed,
    )
    return TrainState(
        config=config,
        env=env,
        eval_env=eval_env,
        spec=spec,
        keyer=keyer,
        params=params,
        target_params=sync_target(params),
        optim=RmsPropState(config.learning_rate, config.rms_decay, config.rms_epsilon),
        buffer=ReplayBuffer(config.buffer_capacity),
        mset=ReturnSet(config.mset_capacity),
        sem_table=sem_table,
        saem_table=saem_table,
        rngs=rngs,
    )


def select_actions(all_q: np.ndarray, epsilon: float, rng: np.random.Generator) -> Tuple[int, ...]:
    """Per agent: uniform random with probability epsilon, else argmax (lowest index on ties)."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    all_q = np.asarray(all_q)
    n_agents, n_actions = all_q.shape
    explore = rng.random(n_agents) < epsilon
    random_actions = rng.integers(0, n_actions, size=n_agents)
    greedy = np.argmax(all_q, axis=-1)
    return tuple(int(a) for a in np.where(explore, random_actions, greedy))


def _rollout(
    env: DecPOMDP,
    params: ParameterSet,
    spec: LearnerSpec,
    seed: int,
    epsilon: float,
    rng: np.random.Generator,
) -> Episode:
    state, observations = env.reset(seed)
    hidden = None
    last_actions = np.full(spec.n_agents, -1, dtype=np.int64) if spec.recurrent else None
    transitions: List[Transition] = []
    success = False
    while not env.done:
        inputs = agent_inputs(observations, last_actions, spec.n_actions)
        q, hidden = agent_step(params, inputs, hidden)
        joint = select_actions(q, epsilon, rng) if epsilon > 0.0 else tuple(int(a) for a in np.argmax(q, axis=-1))
        result = env.step(joint)
        transitions.append(
            Transition(
                observations=observations,
                joint_action=joint,
                global_state=state,
                reward=result.reward,
                terminal=result.terminated and not result.truncated,
            )
        )
        state, observations = result.state, result.observations
        success = success or result.success
        if last_actions is not None:
            last_actions = np.asarray(joint, dtype=np.int64)
    return Episode(transitions, observations, state, seed=seed, env_id=env.env_id, success=success)


def run_episode(env: DecPOMDP, state: TrainState, epsilon: float) -> Episode:
    """One exploring episode: store it in H, push its returns to M (t = T..1), flush M when full."""
    seed = int(state.rngs["env"].integers(0, 2**31 - 1))
    episode = _rollout(env, state.params, state.spec, seed, epsilon, state.rngs["explore"])
    state.buffer.store(episode)
    state.step += len(episode)
    state.episode += 1

    if state.sem_table is not None or state.saem_table is not None:
        returns = discounted_returns(episode.rewards, state.config.gamma)
        keys = state.keyer.keys(np.stack([t.global_state for t in episode.transitions]))
        for t in range(len(episode) - 1, -1, -1):
            if state.mset.push(keys[t], returns[t], episode.transitions[t].joint_action):
                flush_memory(state)
    return episode


def flush_memory(state: TrainState) -> None:
    if not len(state.mset):
        return
    sem_stats, saem_stats = flush_all(state.mset, state.sem_table, state.saem_table)
    state.sem_flushes.add(sem_stats)
    state.saem_flushes.add(saem_stats)
    state.flush_count += 1
    logger.debug(
        "[memory] flush=%s sem_touched=%s saem_touched=%s",
        state.flush_count,
        sem_stats.tables_touched,
        saem_stats.tables_touched,
    )


@dataclass
class UpdateStats:
    loss: float
    mean_y: float
    mean_e_s: Optional[float]
    mean_e_su: Optional[float]
    hits: int
    misses: int


def _masked_mean(values: np.ndarray, mask: np.ndarray) -> float:
    return float(np.sum(values * mask) / max(np.sum(mask), 1.0))


def train_step(state: TrainState) -> UpdateStats:
    config = state.config
    batch = pad_batch(state.buffer.sample(config.batch_size, state.rngs["sample"]))
    targets: Targets = compute_targets(
        state.spec,
        batch,
        state.target_params,
        config.gamma,
        config.memory,
        keyer=state.keyer,
        sem_table=state.sem_table,
        saem_table=state.saem_table,
    )
    loss, grads = training_loss(state.spec, state.params, batch, targets, config.effective_lambda, config.alpha)
    clip_grad_norm(grads, config.grad_clip)
    rmsprop_step(state.params, grads, state.optim)
    state.updates += 1

    primary = targets.saem if config.memory is MemoryMode.saem else targets.sem
    return UpdateStats(
        loss=loss,
        mean_y=_masked_mean(targets.y, batch.mask),
        mean_e_s=None if targets.e_s is None else _masked_mean(targets.e_s, batch.mask),
        mean_e_su=None if targets.e_su is None else _masked_mean(targets.e_su, batch.mask),
        hits=primary.hits if primary is not None else 0,
        misses=primary.misses if primary is not None else 0,
    )


def evaluate(
    params: ParameterSet,
    env: DecPOMDP,
    episodes: int,
    spec: LearnerSpec,
    gamma: float,
    rng: np.random.Generator,
) -> Tuple[float, float]:
    """Greedy rollouts; returns (mean discounted return, success rate). Touches no training state."""
    if episodes <= 0:
        return 0.0, 0.0
    returns: List[float] = []
    successes = 0
    for _ in range(episodes):
        seed = int(rng.integers(0, 2**31 - 1))
        episode = _rollout(env, params, spec, seed, 0.0, rng)
        returns.append(float(discounted_returns(episode.rewards, gamma)[0]))
        successes += int(episode.success)
    return float(np.mean(returns)), successes / episodes


class _Window:
    """Training statistics accumulated between two records."""

    def __init__(self) -> None:
        self.stats: List[UpdateStats] = []

    def add(self, stats: UpdateStats) -> None:
        self.stats.append(stats)

    def record(self, step: int, episode: int) -> MetricsRecord:
        record = MetricsRecord(step=step, episode=episode)
        if self.stats:
            record.loss = float(np.mean([s.loss for s in self.stats]))
            record.mean_y = float(np.mean([s.mean_y for s in self.stats]))
            record.mean_E_s = _mean_optional([s.mean_e_s for s in self.stats])
            record.mean_E_su = _mean_optional([s.mean_e_su for s in self.stats])
            record.table_hits = sum(s.hits for s in self.stats)
            record.table_misses = sum(s.misses for s in self.stats)
        self.stats = []
        return record


def _mean_optional(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def _evaluated(state: TrainState, record: MetricsRecord, started: float) -> MetricsRecord:
    config = state.config
    record.eval_return_mean, record.eval_success_rate = evaluate(
        state.params, state.eval_env, config.eval_episodes, state.spec, config.gamma, state.rngs["eval"]
    )
    table = state.primary_table
    record.table_size = len(table) if table is not None else 0
    if config.record_wall_clock:
        record.wall_ms = int((time.perf_counter() - started) * 1000)
    logger.info(
        "[train] step=%s episode=%s loss=%s eval_return=%.4f success=%.2f table=%s",
        record.step,
        record.episode,
        "-" if record.loss is None else f"{record.loss:.4f}",
        record.eval_return_mean,
        record.eval_success_rate,
        record.table_size,
    )
    return record


def train(config: TrainerConfig, state: Optional[TrainState] = None) -> Iterator[MetricsRecord]:
    """Run the full loop, yielding one record at step 0 and at every evaluation boundary.

    Pass ``state`` to keep a handle on the run (tables, parameters) while iterating.
    """
    state = state or init_train_state(config)
    started = time.perf_counter()
    window = _Window()
    yield _evaluated(state, window.record(0, 0), started)

    next_eval = config.eval_interval
    last_recorded = 0
    while state.step < config.total_steps:
        epsilon = epsilon_at(state.step, config.epsilon)
        run_episode(state.env, state, epsilon)
        if state.buffer.can_sample(config.batch_size):
            for _ in range(config.train_steps_per_episode):
                window.add(train_step(state))
        state.episodes_since_sync += 1
        if state.episodes_since_sync >= config.target_sync_episodes:
            state.target_params = sync_target(state.params)
            state.episodes_since_sync = 0
            logger.debug("[train] target sync episode=%s", state.episode)
        if state.step >= next_eval:
            yield _evaluated(state, window.record(state.step, state.episode), started)
            last_recorded = state.step
            while next_eval <= state.step:
                next_eval += config.eval_interval

    if state.step != last_recorded:
        yield _evaluated(state, window.record(state.step, state.episode), started)
    flush_memory(state)
