from __future__ import annotations

import itertools

import numpy as np
import pytest

from app.core.errors import ShapeError
from app.mixers import (
    MixerKind,
    central_critic,
    central_critic_backward,
    cw_weights,
    init_mixer,
    joint_argmax,
    qmix_backward,
    qmix_mix,
    vdn_mix,
    wqmix_em_weight,
    wqmix_weight,
)
from app.neural import ParameterSet, grad_check


def qmix_params(seed: int, n_agents: int = 2, state_dim: int = 3, embed_dim: int = 8, kind=MixerKind.qmix, n_actions: int = 4):
    params = ParameterSet()
    init_mixer(kind, params, n_agents, n_actions, state_dim, np.random.default_rng(seed), embed_dim=embed_dim, critic_hidden=16)
    return params


def test_vdn_examples():
    assert vdn_mix(np.array([1.5, -0.5])) == 1.0
    assert vdn_mix(np.zeros(3)) == 0.0
    q = np.random.default_rng(0).normal(size=27)
    assert vdn_mix(q) == pytest.approx(sum(float(v) for v in q), abs=1e-12)


def test_vdn_linearity():
    rng = np.random.default_rng(1)
    q, q2 = rng.normal(size=(2, 5))
    a, b = 1.7, -0.3
    assert vdn_mix(a * q + b * q2) == pytest.approx(a * vdn_mix(q) + b * vdn_mix(q2), abs=1e-12)


def test_qmix_forced_to_sum():
    params = qmix_params(0, n_agents=3, embed_dim=1)
    for _, value in params.items():
        value.fill(0.0)
    params["mixer.hyper_w1.0.bias"][:] = 1.0
    params["mixer.hyper_w2.0.bias"][:] = 1.0
    params.bump()
    q = np.array([[0.5, 1.0, 2.0], [0.1, 0.2, 0.3]])
    q_tot, _ = qmix_mix(params, q, np.ones((2, 3)))
    np.testing.assert_allclose(q_tot, q.sum(axis=1), rtol=0, atol=1e-12)


def test_qmix_forced_to_constant():
    params = qmix_params(0, n_agents=2)
    for _, value in params.items():
        value.fill(0.0)
    params["mixer.hyper_v.1.bias"][:] = -2.5
    params.bump()
    q_tot, _ = qmix_mix(params, np.random.default_rng(3).normal(size=(4, 2)), np.ones((4, 3)))
    assert q_tot.tolist() == [-2.5] * 4


def test_qmix_shape_errors():
    params = qmix_params(0)
    with pytest.raises(ShapeError):
        qmix_mix(params, np.zeros((2, 2)), np.zeros((3, 3)))
    with pytest.raises(ShapeError):
        qmix_mix(params, np.zeros(2), np.zeros(3))


def test_qmix_monotone_in_every_agent():
    step = 1e-4
    for seed in range(100):
        params = qmix_params(seed, n_agents=3, state_dim=4)
        rng = np.random.default_rng(1000 + seed)
        q = rng.normal(size=(10, 3)) * 3.0
        states = rng.normal(size=(10, 4))
        base, cache = qmix_mix(params, q, states)
        slopes = qmix_backward(params, cache, np.ones(10), params.zeros_like())
        assert np.all(slopes >= 0.0)
        for agent in range(3):
            bumped = q.copy()
            bumped[:, agent] += step
            up, _ = qmix_mix(params, bumped, states)
            assert np.all((up - base) / step >= -1e-9)


def test_per_agent_argmax_attains_joint_maximum():
    joint = np.array(list(itertools.product(range(4), repeat=2)))
    for seed in range(100):
        params = qmix_params(seed, n_agents=2, state_dim=3)
        rng = np.random.default_rng(500 + seed)
        all_q = rng.normal(size=(2, 4))
        state = rng.normal(size=(1, 3))
        chosen = all_q[np.arange(2), joint]
        values, _ = qmix_mix(params, chosen, np.repeat(state, len(joint), axis=0))
        greedy = joint_argmax(all_q, MixerKind.qmix, state, params)
        greedy_value, _ = qmix_mix(params, all_q[np.arange(2), greedy][None, :], state)
        assert greedy_value[0] >= values.max() - 1e-12


def test_joint_argmax_examples():
    assert tuple(joint_argmax(np.array([[1.0, 3.0], [2.0, 0.0]]))) == (1, 0)
    assert tuple(joint_argmax(np.array([[5.0, 5.0]]))) == (0,)


@pytest.mark.parametrize("seed", range(10))
def test_qmix_gradients(seed):
    params = qmix_params(seed, n_agents=3, state_dim=4)
    rng = np.random.default_rng(seed)
    q = rng.normal(size=(5, 3))
    states = rng.normal(size=(5, 4))
    upstream = rng.normal(size=5)

    def loss_fn(p: ParameterSet):
        q_tot, cache = qmix_mix(p, q, states)
        grads = p.zeros_like()
        qmix_backward(p, cache, upstream, grads)
        return float(np.sum(q_tot * upstream)), grads

    report = grad_check(loss_fn, params)
    assert report.passed, report

    _, cache = qmix_mix(params, q, states)
    d_q = qmix_backward(params, cache, upstream, params.zeros_like())
    step = 1e-5
    for agent in range(3):
        plus, minus = q.copy(), q.copy()
        plus[:, agent] += step
        minus[:, agent] -= step
        numeric = (qmix_mix(params, plus, states)[0] - qmix_mix(params, minus, states)[0]) * upstream / (2 * step)
        np.testing.assert_allclose(d_q[:, agent], numeric, rtol=1e-4, atol=1e-8)


def test_central_critic_constant_and_non_degenerate():
    params = qmix_params(0, kind=MixerKind.wqmix)
    for name in params.names("critic"):
        params[name].fill(0.0)
    params["critic.2.bias"][:] = 1.25
    params.bump()
    joint = np.array(list(itertools.product(range(4), repeat=2)))
    values, _ = central_critic(params, np.ones((len(joint), 3)), joint, 4)
    assert values.tolist() == [1.25] * len(joint)

    for seed in range(100):
        params = qmix_params(seed, kind=MixerKind.wqmix)
        state = np.random.default_rng(seed).normal(size=(1, 3))
        values, _ = central_critic(params, np.repeat(state, len(joint), axis=0), joint, 4)
        assert np.ptp(values) > 0.0


def test_central_critic_rejects_bad_actions():
    params = qmix_params(0, kind=MixerKind.wqmix)
    with pytest.raises(ShapeError):
        central_critic(params, np.zeros((1, 3)), np.array([[0, 4]]), 4)


@pytest.mark.parametrize("seed", range(10))
def test_central_critic_gradients(seed):
    params = qmix_params(seed, kind=MixerKind.wqmix)
    rng = np.random.default_rng(seed)
    states = rng.normal(size=(6, 3))
    actions = rng.integers(0, 4, size=(6, 2))
    upstream = rng.normal(size=6)

    def loss_fn(p: ParameterSet):
        values, cache = central_critic(p, states, actions, 4)
        grads = p.zeros_like()
        central_critic_backward(p, cache, upstream, grads)
        return float(np.sum(values * upstream)), grads

    report = grad_check(loss_fn, params)
    assert report.passed, report


@pytest.mark.parametrize("fn", [wqmix_weight, wqmix_em_weight])
@pytest.mark.parametrize(
    "target,qhat,u,u_star,expected",
    [
        (2.0, 1.5, (0, 1), (1, 1), 1.0),
        (1.0, 1.5, (0, 1), (1, 1), 0.75),
        (2.0, 1.5, (1, 1), (1, 1), 1.0),
        (1.0, 1.5, (1, 1), (1, 1), 1.0),
    ],
)
def test_centrally_weighting_truth_table(fn, target, qhat, u, u_star, expected):
    assert fn(target, qhat, u, u_star, 0.75) == expected


def test_weights_only_take_one_or_alpha():
    rng = np.random.default_rng(0)
    targets, qhat = rng.normal(size=(2, 200))
    actions = rng.integers(0, 2, size=(200, 2))
    u_star = rng.integers(0, 2, size=(200, 2))
    w = cw_weights(targets, qhat, actions, u_star, 0.3)
    assert set(np.unique(w).tolist()) <= {1.0, 0.3}
    for i in range(200):
        assert w[i] == wqmix_weight(targets[i], qhat[i], actions[i], u_star[i], 0.3)
    with pytest.raises(ValueError):
        wqmix_weight(0.0, 0.0, (0,), (1,), 0.0)
