from __future__ import annotations

import itertools
import math
from statistics import median

import numpy as np
import pytest
from scipy.stats import chisquare

from app.core.models import EpsilonSchedule
from app.core.replay import PaddedBatch, discounted_returns, pad_batch
from app.envs import make_env, oracle_optimal_return
from app.memory import SaemTable, SemTable, StateKeyer
from app.mixers import MixerKind, init_mixer, mix
from app.neural import ParameterSet, grad_check, sync_target
from app.trainer import (
    MemoryMode,
    TrainerConfig,
    compute_targets,
    em_loss_terms,
    evaluate,
    init_train_state,
    loss_em,
    loss_wqmix_em,
    run_episode,
    select_actions,
    td_loss_terms,
    train,
    training_loss,
    wqmix_em_terms,
    wqmix_loss_terms,
)
from app.trainer.learner import LearnerSpec, _critic_values, central_weights, forward_taken
from app.trainer.networks import agent_forward, batch_inputs, init_agent, input_dim

N_AGENTS, N_ACTIONS, OBS_DIM, STATE_DIM = 2, 3, 3, 4


def tiny_config(**changes) -> TrainerConfig:
    base = TrainerConfig(
        env="predator_prey_grid",
        hidden_dim=8,
        mixer_embed_dim=4,
        critic_hidden_dim=8,
        batch_size=4,
        buffer_capacity=50,
        mset_capacity=16,
        table_capacity=1000,
        epsilon=EpsilonSchedule(anneal_steps=200),
        total_steps=200,
        eval_interval=100,
        eval_episodes=2,
        target_sync_episodes=5,
    )
    return base.replace(**changes)


def random_batch(seed: int, lengths=(3, 2, 1), terminal_first: bool = True) -> PaddedBatch:
    rng = np.random.default_rng(seed)
    b, horizon = len(lengths), max(lengths)
    mask = np.zeros((b, horizon))
    observations = np.zeros((b, horizon + 1, N_AGENTS, OBS_DIM))
    states = np.zeros((b, horizon + 1, STATE_DIM))
    for i, length in enumerate(lengths):
        mask[i, :length] = 1.0
        observations[i, : length + 1] = rng.normal(size=(length + 1, N_AGENTS, OBS_DIM))
        states[i, : length + 1] = rng.normal(size=(length + 1, STATE_DIM))
    terminals = np.zeros((b, horizon))
    if terminal_first:
        terminals[0, lengths[0] - 1] = 1.0
    return PaddedBatch(
        observations=observations,
        states=states,
        actions=rng.integers(0, N_ACTIONS, size=(b, horizon, N_AGENTS)) * mask[..., None].astype(np.int64),
        rewards=rng.normal(size=(b, horizon)) * 0.3 * mask,
        terminals=terminals,
        mask=mask,
        lengths=np.array(lengths),
    )


def learner(seed: int, mixer: MixerKind, recurrent: bool = False):
    spec = LearnerSpec(MixerKind(mixer), N_AGENTS, N_ACTIONS, STATE_DIM, recurrent)
    rng = np.random.default_rng(seed)
    params = ParameterSet()
    init_agent(params, input_dim(OBS_DIM, N_AGENTS, N_ACTIONS, recurrent), N_ACTIONS, rng, hidden_dim=6, recurrent=recurrent)
    init_mixer(spec.mixer, params, N_AGENTS, N_ACTIONS, STATE_DIM, rng, embed_dim=4, critic_hidden=6)
    return spec, params


# -- action selection and rollouts ----------------------------------------


def test_select_actions_greedy_and_ties():
    rng = np.random.default_rng(0)
    assert select_actions(np.array([[1.0, 3.0], [0.0, -1.0]]), 0.0, rng) == (1, 0)
    assert select_actions(np.array([[2.0, 2.0]]), 0.0, rng) == (0,)
    with pytest.raises(ValueError):
        select_actions(np.zeros((1, 2)), 1.5, rng)


def test_select_actions_uniform_when_exploring():
    rng = np.random.default_rng(1)
    q = np.array([[0.0, 9.0, 1.0, 2.0]])
    counts = np.bincount([select_actions(q, 1.0, rng)[0] for _ in range(10_000)], minlength=4)
    assert chisquare(counts).pvalue > 1e-3


def test_run_episode_pushes_discounted_returns():
    state = init_train_state(tiny_config(mset_capacity=1000))
    episode = run_episode(state.env, state, 1.0)
    items = state.mset.items
    assert len(items) == len(episode)
    returns = discounted_returns(episode.rewards, state.config.gamma)
    keys = state.keyer.keys(np.stack([t.global_state for t in episode.transitions]))
    for t, item in enumerate(reversed(items)):
        assert item.value == returns[t]
        assert item.key == keys[t]
        assert item.joint_action == episode.transitions[t].joint_action
    assert len(state.buffer) == 1
    assert state.step == len(episode)


def test_matrix_game_pushes_one_item():
    state = init_train_state(tiny_config(env="matrix_game", mset_capacity=1000))
    episode = run_episode(state.env, state, 1.0)
    assert len(state.mset) == 1
    assert state.mset.items[0].value == episode.rewards[0]


def test_full_return_set_is_flushed():
    state = init_train_state(tiny_config(mset_capacity=3))
    while state.flush_count == 0:
        run_episode(state.env, state, 1.0)
    assert len(state.sem_table) > 0
    assert state.sem_flushes.tables_touched == state.flush_count
    assert len(state.mset) < 3


# -- targets ---------------------------------------------------------------


@pytest.mark.parametrize("mixer", [MixerKind.vdn, MixerKind.qmix])
def test_targets_match_joint_enumeration(mixer):
    spec, params = learner(3, mixer)
    batch = random_batch(4, lengths=(4, 3, 4, 1))
    gamma = 0.9
    targets = compute_targets(spec, batch, params, gamma, MemoryMode.none)
    all_q, _ = agent_forward(params, batch_inputs(batch, N_ACTIONS, False))
    joint = list(itertools.product(range(N_ACTIONS), repeat=N_AGENTS))
    expected = np.zeros_like(batch.rewards)
    for b, t in itertools.product(range(batch.batch_size), range(batch.max_len)):
        if not batch.mask[b, t]:
            continue
        best = -np.inf
        for u in joint:
            chosen = np.array([[all_q[b, t + 1, a, u[a]] for a in range(N_AGENTS)]])
            value, _ = mix(mixer, params, chosen, batch.states[b, t + 1][None, :])
            best = max(best, float(value[0]))
        expected[b, t] = batch.rewards[b, t] + gamma * (1.0 - batch.terminals[b, t]) * best
    np.testing.assert_allclose(targets.y, expected, rtol=0, atol=1e-10)


def test_terminal_step_targets():
    spec, params = learner(0, MixerKind.vdn)
    batch = random_batch(1, lengths=(1,))
    batch.rewards[0, 0] = 5.0
    keyer = StateKeyer(STATE_DIM, use_projection=False)
    table = SemTable(10)
    table.merge(keyer.key(batch.states[0, 1]), 100.0)
    targets = compute_targets(spec, batch, params, 0.99, MemoryMode.sem, keyer, table)
    assert targets.y[0, 0] == 5.0
    assert targets.e[0, 0] == 5.0


@pytest.mark.parametrize("mixer", list(MixerKind))
def test_empty_table_falls_back_to_vanilla_target(mixer):
    spec, params = learner(5, mixer)
    batch = random_batch(6, lengths=(4,) * 25, terminal_first=False)
    keyer = StateKeyer(STATE_DIM, projection_dim=4, seed=0)
    sem, saem = SemTable(100), SaemTable(100)
    targets = compute_targets(spec, batch, params, 0.99, MemoryMode.sem, keyer, sem, saem)
    assert np.array_equal(targets.e_s, targets.y)
    assert np.array_equal(targets.e_su, targets.y)
    assert targets.sem.misses == targets.saem.misses == 100
    assert targets.sem.hits == 0


def test_memory_none_uses_y():
    spec, params = learner(0, MixerKind.vdn)
    batch = random_batch(1)
    targets = compute_targets(spec, batch, params, 0.99, MemoryMode.none)
    assert targets.e is targets.y
    assert targets.e_s is None and targets.e_su is None
    assert TrainerConfig(memory="none", lam=0.7).effective_lambda == 0.0


# -- losses ----------------------------------------------------------------


def test_em_loss_examples():
    one = np.ones((1, 1))
    loss, _ = em_loss_terms(one * 1.0, one * 2.0, one * 1.5, 0.1, one)
    assert loss == pytest.approx(0.925)
    loss, _ = em_loss_terms(one * 1.0, one * 2.0, one * 1.5, 1.0, one)
    assert loss == pytest.approx(0.25)


def test_lambda_zero_is_the_vanilla_loss_bit_for_bit():
    rng = np.random.default_rng(0)
    q, y, e = rng.normal(size=(3, 5, 4))
    mask = (rng.random((5, 4)) < 0.7).astype(np.float64)
    em_loss, em_grad = em_loss_terms(q, y, e, 0.0, mask)
    td_loss, td_grad = td_loss_terms(q, y, mask)
    assert em_loss == td_loss
    assert em_grad.tobytes() == td_grad.tobytes()

    q_hat = rng.normal(size=(5, 4))
    w = np.where(rng.random((5, 4)) < 0.5, 1.0, 0.75)
    w_e = np.where(rng.random((5, 4)) < 0.5, 1.0, 0.75)
    loss, d_q, d_hat = wqmix_em_terms(q, q_hat, y, e, w, w_e, 0.0, mask)
    ref_loss, ref_q, ref_hat = wqmix_loss_terms(q, q_hat, y, w, mask)
    assert loss == ref_loss
    assert d_q.tobytes() == ref_q.tobytes()
    assert d_hat.tobytes() == ref_hat.tobytes()


def test_unit_weights_with_matching_critic_double_the_em_loss():
    rng = np.random.default_rng(2)
    q, y, e = rng.normal(size=(3, 4, 3))
    mask = np.ones((4, 3))
    ones = np.ones((4, 3))
    loss, _, _ = wqmix_em_terms(q, q, y, e, ones, ones, 0.3, mask)
    em, _ = em_loss_terms(q, y, e, 0.3, mask)
    assert loss == pytest.approx(2.0 * em, rel=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_wqmix_lambda_zero_matches_plain_wqmix_loss(seed):
    spec, params = learner(seed, MixerKind.wqmix)
    batch = random_batch(seed + 50)
    rng = np.random.default_rng(seed)
    y = rng.normal(size=batch.rewards.shape) * batch.mask
    e = rng.normal(size=batch.rewards.shape) * batch.mask
    loss, _ = loss_wqmix_em(spec, params, batch, y, e, 0.0, 0.75)
    fwd = forward_taken(spec, params, batch)
    q_hat, _ = _critic_values(spec, params, batch.states[:, :-1], batch.actions)
    weights = central_weights(spec, params, batch, fwd.all_q, y, e, 0.75)
    ref, _, _ = wqmix_loss_terms(fwd.q_tot, q_hat, y, weights.w, batch.mask)
    assert loss == ref


def _filled_tables(batch: PaddedBatch, keyer: StateKeyer, seed: int):
    # half of the next states and half of the (state, joint action) pairs get a stored return
    rng = np.random.default_rng(seed)
    sem, saem = SemTable(1000), SaemTable(1000)
    for b, t in zip(*np.nonzero(batch.mask)):
        if rng.random() < 0.5:
            sem.merge(keyer.key(batch.states[b, t + 1]), float(rng.normal()))
        if rng.random() < 0.5:
            ja = tuple(int(a) for a in batch.actions[b, t])
            saem.member(ja, create=True).merge(keyer.key(batch.states[b, t]), float(rng.normal()))
    return sem, saem


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("memory", list(MemoryMode))
@pytest.mark.parametrize("mixer", list(MixerKind))
def test_every_loss_path_passes_gradient_check(mixer, memory, seed):
    recurrent = seed % 2 == 1
    spec, params = learner(seed, mixer, recurrent=recurrent)
    batch = random_batch(100 + seed)
    keyer = StateKeyer(STATE_DIM, use_projection=False)
    sem, saem = _filled_tables(batch, keyer, seed)
    target_params = sync_target(params)
    targets = compute_targets(spec, batch, target_params, 0.99, memory, keyer, sem, saem)
    lam = 0.0 if memory is MemoryMode.none else 0.3

    report = grad_check(
        lambda p: training_loss(spec, p, batch, targets, lam, 0.75),
        params,
        step=1e-6,
        max_coords_per_tensor=3,
        rng=np.random.default_rng(seed),
    )
    assert report.passed, report


def test_padding_does_not_change_loss():
    state = init_train_state(tiny_config(env="lever_coordination"))
    for _ in range(6):
        run_episode(state.env, state, 1.0)
    episodes = list(state.buffer.episodes)
    tight = pad_batch(episodes)
    loose = pad_batch(episodes, pad_to=tight.max_len + 3)
    results = []
    for batch in (tight, loose):
        targets = compute_targets(state.spec, batch, state.target_params, 0.99, MemoryMode.none)
        results.append((targets.y, *loss_em(state.spec, state.params, batch, targets.y, targets.y, 0.0)))
    (y_a, loss_a, grads_a), (y_b, loss_b, grads_b) = results
    np.testing.assert_allclose(y_b[:, : tight.max_len], y_a, rtol=0, atol=1e-12)
    assert np.all(y_b[:, tight.max_len :] == 0.0)
    assert loss_b == pytest.approx(loss_a, rel=1e-12)
    for name, value in grads_a.items():
        np.testing.assert_allclose(grads_b[name], value, rtol=1e-10, atol=1e-12)


# -- loop ------------------------------------------------------------------


def test_zero_steps_yields_only_the_initial_record():
    records = list(train(tiny_config(total_steps=0)))
    assert len(records) == 1
    assert records[0].step == 0 and records[0].loss is None
    assert records[0].eval_return_mean is not None


def test_same_seed_same_run():
    config = tiny_config(env="lever_coordination", total_steps=120, eval_interval=40)
    first, second = init_train_state(config), init_train_state(config)
    assert list(train(config, first)) == list(train(config, second))
    assert first.params.digest() == second.params.digest()
    assert first.sem_table.entries == second.sem_table.entries


def test_records_follow_evaluation_points():
    records = list(train(tiny_config(total_steps=250, eval_interval=100)))
    steps = [r.step for r in records]
    assert steps[0] == 0
    assert steps == sorted(steps)
    assert steps[-1] >= 250
    assert all(r.wall_ms == 0 for r in records)


def test_lambda_zero_sem_matches_vanilla_run():
    common = dict(env="matrix_game", total_steps=2000, eval_interval=500, eval_episodes=4, batch_size=32, hidden_dim=16)
    sem_config = tiny_config(memory="sem", lam=0.0, **common)
    vanilla_config = tiny_config(memory="none", lam=0.1, **common)
    sem_state, vanilla_state = init_train_state(sem_config), init_train_state(vanilla_config)
    assert list(train(sem_config, sem_state)) == list(train(vanilla_config, vanilla_state))
    assert sem_state.params.digest() == vanilla_state.params.digest()


def test_evaluate_leaves_training_state_alone():
    state = init_train_state(tiny_config())
    list(train(state.config, state))
    digest, buffered, table_len, hits = state.params.digest(), len(state.buffer), len(state.sem_table), state.sem_table.hits
    a = evaluate(state.params, state.eval_env, 5, state.spec, 0.99, np.random.default_rng(9))
    b = evaluate(state.params, state.eval_env, 5, state.spec, 0.99, np.random.default_rng(9))
    assert a == b
    assert 0.0 <= a[1] <= 1.0
    assert state.params.digest() == digest
    assert (len(state.buffer), len(state.sem_table), state.sem_table.hits) == (buffered, table_len, hits)


def test_target_network_only_moves_on_sync():
    stale = init_train_state(tiny_config(target_sync_episodes=10**6))
    initial = stale.target_params.digest()
    list(train(stale.config, stale))
    assert stale.updates > 0
    assert stale.target_params.digest() == initial
    assert stale.params.digest() != initial

    fresh = init_train_state(tiny_config(target_sync_episodes=1))
    list(train(fresh.config, fresh))
    assert fresh.target_params.digest() == fresh.params.digest()


def test_table_values_are_realized_returns():
    config = tiny_config(total_steps=600, use_projection=False, table_capacity=100_000, mset_capacity=8)
    state = init_train_state(config)
    oracle = oracle_optimal_return(make_env(config.env), config.gamma)
    seen = {}
    while state.step < config.total_steps:
        run_episode(state.env, state, 1.0)
        for key, entry in state.sem_table.items():
            assert entry.value >= seen.get(key, -np.inf)
            assert entry.value <= oracle.best_case_return + 1e-9
            seen[key] = entry.value
    assert seen


# -- directional experiments -------------------------------------------------


def _first_reaching(config: TrainerConfig, reached) -> float:
    """Environment steps until the trained greedy policy first satisfies ``reached``; inf if never."""
    for record in train(config):
        if record.episode > 0 and record.eval_return_mean is not None and reached(record):
            return record.step
    return math.inf


@pytest.mark.slow
def test_climbing_game_settles_on_the_shadowed_equilibrium():
    # A one-step game has E_s = r, so SEM-VDN and VDN minimise the same loss.
    # Under uniform exploration additive utilities follow the payoff row means
    # (-6.33, -5.67, 1.67): both arms settle on (2, 2) and never reach the 11 at (0, 0).
    base = TrainerConfig(
        env="matrix_game",
        mixer="vdn",
        total_steps=3000,
        eval_interval=500,
        eval_episodes=1,
        epsilon=EpsilonSchedule(start=1.0, end=1.0, anneal_steps=1),
        learning_rate=1e-3,
        hidden_dim=32,
    )
    for seed in range(10):
        finals = []
        for config in (base.replace(memory="sem", lam=0.1, seed=seed), base.replace(memory="none", seed=seed)):
            records = list(train(config))
            assert records[-1].step == base.total_steps
            finals.append((records[-1].eval_return_mean, records[-1].eval_success_rate))
        assert finals[0] == finals[1] == (5.0, 0.0)


@pytest.mark.slow
def test_sem_vdn_reaches_coordination_optimum_no_later():
    base = TrainerConfig(
        env="matrix_game",
        env_params={"payoff": [[10.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]},
        mixer="vdn",
        total_steps=2000,
        eval_interval=25,
        eval_episodes=1,
        epsilon=EpsilonSchedule(anneal_steps=1000),
        hidden_dim=32,
    )

    def optimal(record):
        return record.eval_success_rate == 1.0

    sem = [_first_reaching(base.replace(memory="sem", lam=0.1, seed=s), optimal) for s in range(10)]
    vanilla = [_first_reaching(base.replace(memory="none", seed=s), optimal) for s in range(10)]
    assert median(sem) <= base.total_steps
    assert median(vanilla) <= base.total_steps
    assert median(sem) <= median(vanilla)


@pytest.mark.slow
def test_sem_qmix_reaches_predator_threshold_no_later():
    base = TrainerConfig(
        env="predator_prey_grid",
        mixer="qmix",
        total_steps=20_000,
        eval_interval=1000,
        eval_episodes=16,
        epsilon=EpsilonSchedule(anneal_steps=10_000),
        learning_rate=1e-3,
        train_steps_per_episode=2,
        hidden_dim=32,
    )
    threshold = 0.9 * oracle_optimal_return(make_env(base.env), base.gamma).optimal_discounted_return

    def good(record):
        return record.eval_return_mean >= threshold

    sem = [_first_reaching(base.replace(memory="sem", lam=0.1, seed=s), good) for s in range(10)]
    vanilla = [_first_reaching(base.replace(memory="none", seed=s), good) for s in range(10)]
    assert median(sem) <= base.total_steps
    assert median(sem) <= median(vanilla)


@pytest.mark.slow
def test_vanilla_target_sits_above_memory_target():
    config = TrainerConfig(
        env="predator_prey_grid",
        mixer="vdn",
        memory="none",
        total_steps=20_000,
        eval_interval=500,
        eval_episodes=4,
        epsilon=EpsilonSchedule(anneal_steps=10_000),
        hidden_dim=32,
        use_projection=False,
        table_capacity=100_000,
    )
    state = init_train_state(config)
    oracle = oracle_optimal_return(make_env(config.env), config.gamma)
    points = []
    for record in train(config, state):
        lookups = record.table_hits + record.table_misses
        if record.mean_y is not None and lookups and record.table_hits / lookups > 0.5:
            points.append(record.mean_y > record.mean_E_s)
        assert all(e.value <= oracle.best_case_return + 1e-9 for _, e in state.sem_table.items())
    assert points
    assert sum(points) / len(points) >= 0.7
