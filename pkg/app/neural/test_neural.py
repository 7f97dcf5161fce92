from __future__ import annotations

import numpy as np
import pytest

from app.core.errors import CacheError, NumericsError, ShapeError
from app.neural import (
    GradBuffer,
    ParameterSet,
    RmsPropState,
    backward,
    clip_grad_norm,
    grad_check,
    gru_forward,
    init_gru,
    init_mlp,
    mlp_backward,
    mlp_forward,
    rmsprop_step,
    sync_target,
)


def random_mlp(seed: int, dims=(5, 7, 6, 3)) -> ParameterSet:
    params = ParameterSet()
    init_mlp(params, "net", dims, np.random.default_rng(seed))
    return params


def test_identity_layer_and_bias_only_layer():
    identity = ParameterSet({"lin.0.weight": np.eye(3), "lin.0.bias": np.zeros(3)})
    x = np.array([[1.0, -2.0, 3.5]])
    out, _ = mlp_forward(identity, "lin", x)
    assert out.tolist() == x.tolist()

    bias = np.array([0.5, -1.0])
    constant = ParameterSet({"lin.0.weight": np.zeros((4, 2)), "lin.0.bias": bias})
    out, _ = mlp_forward(constant, "lin", np.random.default_rng(0).normal(size=(6, 4)))
    assert np.all(out == bias)


def test_mlp_matches_straightforward_chain():
    params = random_mlp(1)
    x = np.random.default_rng(2).normal(size=(4, 5))
    out, _ = mlp_forward(params, "net", x)
    h = x
    for i in range(3):
        h = h @ params[f"net.{i}.weight"] + params[f"net.{i}.bias"]
        if i < 2:
            h = np.maximum(h, 0.0)
    np.testing.assert_allclose(out, h, rtol=0, atol=1e-12)


def test_mlp_shape_mismatch():
    with pytest.raises(ShapeError):
        mlp_forward(random_mlp(0), "net", np.zeros((2, 4)))


def test_linear_backward_closed_form():
    params = ParameterSet({"lin.0.weight": np.ones((3, 1)), "lin.0.bias": np.zeros(1)})
    x = np.array([[1.0, 2.0, 3.0]])
    _, cache = mlp_forward(params, "lin", x)
    grads = params.zeros_like()
    dx = mlp_backward(params, cache, np.ones((1, 1)), grads)
    assert grads["lin.0.weight"].ravel().tolist() == [1.0, 2.0, 3.0]
    assert grads["lin.0.bias"].tolist() == [1.0]
    assert dx.tolist() == [[1.0, 1.0, 1.0]]


def test_relu_blocks_negative_pre_activation():
    params = ParameterSet({"lin.0.weight": np.eye(2), "lin.0.bias": np.zeros(2)})
    _, cache = mlp_forward(params, "lin", np.array([[-1.0, 2.0]]), activate_last=True)
    dx = mlp_backward(params, cache, np.ones((1, 2)), params.zeros_like())
    assert dx.tolist() == [[0.0, 1.0]]


def test_gru_zero_everything_gives_zero_hidden():
    params = ParameterSet()
    init_gru(params, "cell", 3, 4, np.random.default_rng(0))
    for _, value in params.items():
        value.fill(0.0)
    h, _ = gru_forward(params, "cell", np.zeros((1, 3)), np.zeros((1, 4)))
    assert h.tolist() == [[0.0] * 4]


def test_gru_shape_contract():
    params = ParameterSet()
    init_gru(params, "cell", 5, 8, np.random.default_rng(0))
    rng = np.random.default_rng(1)
    h, _ = gru_forward(params, "cell", rng.normal(size=(3, 5)), rng.normal(size=(3, 8)))
    assert h.shape == (3, 8)
    with pytest.raises(ShapeError):
        gru_forward(params, "cell", rng.normal(size=(3, 5)), np.zeros((3, 7)))


@pytest.mark.parametrize("seed", range(10))
def test_mlp_gradients_match_finite_differences(seed):
    params = random_mlp(seed)
    rng = np.random.default_rng(100 + seed)
    x = rng.normal(size=(4, 5))
    weights = rng.normal(size=(4, 3))

    def loss_fn(p: ParameterSet):
        out, cache = mlp_forward(p, "net", x)
        grads = p.zeros_like()
        mlp_backward(p, cache, weights, grads)
        return float(np.sum(out * weights)), grads

    report = grad_check(loss_fn, params)
    assert report.passed, report
    assert report.checked == params.size


@pytest.mark.parametrize("seed", range(10))
def test_gru_gradients_match_finite_differences(seed):
    params = ParameterSet()
    init_gru(params, "cell", 4, 6, np.random.default_rng(seed))
    rng = np.random.default_rng(200 + seed)
    x = rng.normal(size=(3, 4))
    h0 = rng.normal(size=(3, 6)) * 0.5
    weights = rng.normal(size=(3, 6))

    def loss_fn(p: ParameterSet):
        # two steps so the hidden-state path is exercised
        h1, c1 = gru_forward(p, "cell", x, h0)
        h2, c2 = gru_forward(p, "cell", x * 0.5, h1)
        grads = p.zeros_like()
        _, dh1 = backward(p, c2, weights, grads)
        backward(p, c1, dh1, grads)
        return float(np.sum(h2 * weights)), grads

    report = grad_check(loss_fn, params)
    assert report.passed, report


def test_grad_check_closed_forms():
    params = ParameterSet({"p": np.array([0.3, -1.2, 2.0])})

    def quadratic(p: ParameterSet):
        return float(np.sum(p["p"] ** 2)), GradBuffer({"p": 2.0 * p["p"]})

    def linear(p: ParameterSet):
        c = np.array([1.5, -2.0, 0.25])
        return float(np.sum(c * p["p"])), GradBuffer({"p": c})

    assert grad_check(quadratic, params).max_relative_error < 1e-8
    assert grad_check(linear, params).max_relative_error < 1e-8
    assert params["p"].tolist() == [0.3, -1.2, 2.0]


def test_stale_cache_is_rejected():
    params = random_mlp(0)
    x = np.ones((1, 5))
    _, cache = mlp_forward(params, "net", x)
    params.set("net.0.bias", np.zeros(7))
    with pytest.raises(CacheError):
        mlp_backward(params, cache, np.ones((1, 3)), params.zeros_like())

    other = random_mlp(0)
    _, cache = mlp_forward(other, "net", x)
    with pytest.raises(CacheError):
        mlp_backward(params, cache, np.ones((1, 3)), params.zeros_like())
    with pytest.raises(CacheError):
        backward(params, object(), np.ones((1, 3)), params.zeros_like())


def test_forward_backward_bit_reproducible():
    params = random_mlp(4)
    x = np.random.default_rng(5).normal(size=(8, 5))
    out_a, cache_a = mlp_forward(params, "net", x)
    out_b, cache_b = mlp_forward(params, "net", x)
    grads_a, grads_b = params.zeros_like(), params.zeros_like()
    mlp_backward(params, cache_a, np.ones_like(out_a), grads_a)
    mlp_backward(params, cache_b, np.ones_like(out_b), grads_b)
    assert out_a.tobytes() == out_b.tobytes()
    assert grads_a.digest() == grads_b.digest()


def test_rmsprop_examples():
    params = ParameterSet({"p": np.zeros(1)})
    state = RmsPropState(learning_rate=0.1, decay=0.99, epsilon=1e-5)
    rmsprop_step(params, GradBuffer({"p": np.ones(1)}), state)
    assert state.second_moments["p"][0] == pytest.approx(0.01)
    assert params["p"][0] == pytest.approx(-0.99950037, abs=1e-7)

    before = params["p"].copy()
    rmsprop_step(params, GradBuffer({"p": np.zeros(1)}), state)
    assert params["p"].tolist() == before.tolist()
    assert state.second_moments["p"][0] == pytest.approx(0.0099)
    assert RmsPropState().learning_rate == 5e-4


def test_rmsprop_rejects_non_finite_gradient():
    params = ParameterSet({"p": np.zeros(2)})
    with pytest.raises(NumericsError):
        rmsprop_step(params, GradBuffer({"p": np.array([1.0, np.nan])}), RmsPropState())
    assert params["p"].tolist() == [0.0, 0.0]


@pytest.mark.parametrize("lr", [1e-3, 1e-2])
def test_rmsprop_descends_convex_quadratic(lr):
    curvature = np.array([1.0, 2.0, 0.5])
    params = ParameterSet({"p": np.array([1.0, -2.0, 3.0])})
    state = RmsPropState(learning_rate=lr)
    losses = []
    for _ in range(200):
        p = params["p"]
        losses.append(0.5 * float(np.sum(curvature * p * p)))
        rmsprop_step(params, GradBuffer({"p": curvature * p}), state)
    tail = losses[10:]
    assert all(b <= a for a, b in zip(tail, tail[1:]))
    assert tail[-1] < losses[0]


def test_clip_grad_norm():
    grads = GradBuffer({"a": np.array([3.0]), "b": np.array([4.0])})
    assert clip_grad_norm(grads, 1.0) == pytest.approx(5.0)
    assert grads.global_norm() == pytest.approx(1.0)
    assert clip_grad_norm(grads, None) == pytest.approx(1.0)


def test_sync_target_isolation():
    params = random_mlp(0)
    target = sync_target(params)
    assert target.digest() == params.digest()
    assert sync_target(target).digest() == params.digest()
    params["net.0.weight"][0, 0] += 1.0
    params.bump()
    assert target.digest() != params.digest()
    assert target["net.0.weight"][0, 0] == pytest.approx(params["net.0.weight"][0, 0] - 1.0)
