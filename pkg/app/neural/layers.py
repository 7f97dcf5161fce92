"""Dense layers, a GRU cell and their exact reverse-mode gradients.

Weights are stored as (fan_in, fan_out) so a batch of row vectors maps with
``x @ W + b``; any leading batch dimensions are flattened by the caller.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import expit

from app.core.errors import CacheError, ShapeError
from .params import GradBuffer, ParameterSet, check_finite

GRU_INPUT_WEIGHTS = ("w_ir", "w_iz", "w_in")
GRU_HIDDEN_WEIGHTS = ("w_hr", "w_hz", "w_hn")
GRU_BIASES = ("b_r", "b_z", "b_in", "b_hn")


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))


def elu_grad(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0.0, 1.0, np.exp(np.minimum(x, 0.0)))


def init_linear(params: ParameterSet, name: str, fan_in: int, fan_out: int, rng: np.random.Generator) -> None:
    bound = 1.0 / np.sqrt(fan_in)
    params.add(f"{name}.weight", rng.uniform(-bound, bound, size=(fan_in, fan_out)))
    params.add(f"{name}.bias", rng.uniform(-bound, bound, size=(fan_out,)))


def init_mlp(params: ParameterSet, prefix: str, dims: Sequence[int], rng: np.random.Generator) -> None:
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        init_linear(params, f"{prefix}.{i}", fan_in, fan_out, rng)


def init_gru(params: ParameterSet, prefix: str, input_dim: int, hidden_dim: int, rng: np.random.Generator) -> None:
    bound = 1.0 / np.sqrt(hidden_dim)
    for name in GRU_INPUT_WEIGHTS:
        params.add(f"{prefix}.{name}", rng.uniform(-bound, bound, size=(input_dim, hidden_dim)))
    for name in GRU_HIDDEN_WEIGHTS:
        params.add(f"{prefix}.{name}", rng.uniform(-bound, bound, size=(hidden_dim, hidden_dim)))
    for name in GRU_BIASES:
        params.add(f"{prefix}.{name}", rng.uniform(-bound, bound, size=(hidden_dim,)))


def _layer_count(params: ParameterSet, prefix: str) -> int:
    count = 0
    while f"{prefix}.{count}.weight" in params:
        count += 1
    if count == 0:
        raise KeyError(f"no layers under prefix {prefix!r}")
    return count


@dataclass
class MlpCache:
    params_uid: int
    params_version: int
    prefix: str
    activate_last: bool
    inputs: List[np.ndarray] = field(default_factory=list)
    pre_activations: List[np.ndarray] = field(default_factory=list)


@dataclass
class GruCache:
    params_uid: int
    params_version: int
    prefix: str
    x: np.ndarray
    h: np.ndarray
    r: np.ndarray
    z: np.ndarray
    n: np.ndarray
    hn: np.ndarray


def _check_cache(params: ParameterSet, cache: MlpCache | GruCache) -> None:
    if cache.params_uid != params.uid:
        raise CacheError(f"{cache.prefix}: cache was produced with another parameter set")
    if cache.params_version != params.version:
        raise CacheError(f"{cache.prefix}: parameters changed since the forward pass")


def mlp_forward(
    params: ParameterSet,
    prefix: str,
    x: np.ndarray,
    activate_last: bool = False,
) -> Tuple[np.ndarray, MlpCache]:
    """Affine layers with ReLU in between; the last layer is linear unless ``activate_last``."""
    n_layers = _layer_count(params, prefix)
    cache = MlpCache(params.uid, params.version, prefix, activate_last)
    out = np.asarray(x, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeError(f"{prefix}: expected a (batch, features) input, got shape {out.shape}")
    for i in range(n_layers):
        weight = params[f"{prefix}.{i}.weight"]
        if out.shape[-1] != weight.shape[0]:
            raise ShapeError(f"{prefix}.{i}: input dimension {out.shape[-1]} != {weight.shape[0]}")
        cache.inputs.append(out)
        pre = out @ weight + params[f"{prefix}.{i}.bias"]
        cache.pre_activations.append(pre)
        out = relu(pre) if (i < n_layers - 1 or activate_last) else pre
    return check_finite(out, prefix), cache


def mlp_backward(params: ParameterSet, cache: MlpCache, upstream: np.ndarray, grads: GradBuffer) -> np.ndarray:
    _check_cache(params, cache)
    n_layers = len(cache.inputs)
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != cache.pre_activations[-1].shape:
        raise ShapeError(f"{cache.prefix}: upstream shape {g.shape} != {cache.pre_activations[-1].shape}")
    for i in range(n_layers - 1, -1, -1):
        if i < n_layers - 1 or cache.activate_last:
            g = g * (cache.pre_activations[i] > 0.0)
        grads.accumulate(f"{cache.prefix}.{i}.weight", cache.inputs[i].T @ g)
        grads.accumulate(f"{cache.prefix}.{i}.bias", g.sum(axis=0))
        g = g @ params[f"{cache.prefix}.{i}.weight"].T
    return g


def gru_forward(params: ParameterSet, prefix: str, x: np.ndarray, h: np.ndarray) -> Tuple[np.ndarray, GruCache]:
    """r = s(xW_ir + hW_hr + b_r), z = s(xW_iz + hW_hz + b_z),
    n = tanh(xW_in + b_in + r*(hW_hn + b_hn)), h' = (1 - z)*n + z*h."""
    hidden_dim = params[f"{prefix}.w_hr"].shape[0]
    if h.ndim != 2 or h.shape[-1] != hidden_dim:
        raise ShapeError(f"{prefix}: hidden shape {h.shape} does not end in {hidden_dim}")
    if x.ndim != 2 or x.shape[-1] != params[f"{prefix}.w_ir"].shape[0]:
        raise ShapeError(f"{prefix}: input shape {x.shape} does not match the cell")
    if x.shape[0] != h.shape[0]:
        raise ShapeError(f"{prefix}: batch {x.shape[0]} != hidden batch {h.shape[0]}")
    p = _gru_tensors(params, prefix)
    r = expit(x @ p["w_ir"] + h @ p["w_hr"] + p["b_r"])
    z = expit(x @ p["w_iz"] + h @ p["w_hz"] + p["b_z"])
    hn = h @ p["w_hn"] + p["b_hn"]
    n = np.tanh(x @ p["w_in"] + p["b_in"] + r * hn)
    h_new = (1.0 - z) * n + z * h
    cache = GruCache(params.uid, params.version, prefix, x, h, r, z, n, hn)
    return check_finite(h_new, prefix), cache


def gru_backward(
    params: ParameterSet, cache: GruCache, upstream: np.ndarray, grads: GradBuffer
) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (d input, d previous hidden)."""
    _check_cache(params, cache)
    prefix = cache.prefix
    p = _gru_tensors(params, prefix)
    x, h, r, z, n, hn = cache.x, cache.h, cache.r, cache.z, cache.n, cache.hn
    if upstream.shape != h.shape:
        raise ShapeError(f"{prefix}: upstream shape {upstream.shape} != {h.shape}")

    dh = upstream * z
    dz_pre = upstream * (h - n) * z * (1.0 - z)
    dn_pre = upstream * (1.0 - z) * (1.0 - n * n)
    dhn = dn_pre * r
    dr_pre = dn_pre * hn * r * (1.0 - r)

    grads.accumulate(f"{prefix}.w_in", x.T @ dn_pre)
    grads.accumulate(f"{prefix}.b_in", dn_pre.sum(axis=0))
    grads.accumulate(f"{prefix}.w_hn", h.T @ dhn)
    grads.accumulate(f"{prefix}.b_hn", dhn.sum(axis=0))
    grads.accumulate(f"{prefix}.w_iz", x.T @ dz_pre)
    grads.accumulate(f"{prefix}.w_hz", h.T @ dz_pre)
    grads.accumulate(f"{prefix}.b_z", dz_pre.sum(axis=0))
    grads.accumulate(f"{prefix}.w_ir", x.T @ dr_pre)
    grads.accumulate(f"{prefix}.w_hr", h.T @ dr_pre)
    grads.accumulate(f"{prefix}.b_r", dr_pre.sum(axis=0))

    dx = dn_pre @ p["w_in"].T + dz_pre @ p["w_iz"].T + dr_pre @ p["w_ir"].T
    dh = dh + dhn @ p["w_hn"].T + dz_pre @ p["w_hz"].T + dr_pre @ p["w_hr"].T
    return dx, dh


def backward(
    params: ParameterSet, cache: MlpCache | GruCache, upstream: np.ndarray, grads: GradBuffer
) -> np.ndarray | Tuple[np.ndarray, np.ndarray]:
    """Dispatch on the cache type produced by the matching forward call."""
    if isinstance(cache, MlpCache):
        return mlp_backward(params, cache, upstream, grads)
    if isinstance(cache, GruCache):
        return gru_backward(params, cache, upstream, grads)
    raise CacheError(f"unknown cache type {type(cache).__name__}")


def _gru_tensors(params: ParameterSet, prefix: str) -> dict[str, np.ndarray]:
    names = GRU_INPUT_WEIGHTS + GRU_HIDDEN_WEIGHTS + GRU_BIASES
    return {name: params[f"{prefix}.{name}"] for name in names}
