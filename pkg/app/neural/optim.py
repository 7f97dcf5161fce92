from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from app.core.errors import NumericsError, ShapeError
from .params import GradBuffer, ParameterSet


@dataclass
class RmsPropState:
    learning_rate: float = 5e-4
    decay: float = 0.99
    epsilon: float = 1e-5
    second_moments: Dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "RmsPropState":
        return RmsPropState(
            self.learning_rate,
            self.decay,
            self.epsilon,
            {name: value.copy() for name, value in self.second_moments.items()},
        )


def clip_grad_norm(grads: GradBuffer, max_norm: Optional[float]) -> float:
    """Scale gradients in place so their global norm is at most ``max_norm``; returns the norm before."""
    norm = grads.global_norm()
    if max_norm is not None and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for _, value in grads.items():
            value *= scale
    return norm


def rmsprop_step(params: ParameterSet, grads: GradBuffer, state: RmsPropState) -> ParameterSet:
    """v <- decay*v + (1 - decay)*g^2 ; p <- p - lr*g / sqrt(v + eps)."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericsError(f"non-finite gradient for {name}")
    for name, g in grads.items():
        p = params[name]
        if p.shape != g.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        v = state.second_moments.get(name)
        if v is None:
            v = np.zeros_like(p)
            state.second_moments[name] = v
        v *= state.decay
        v += (1.0 - state.decay) * g * g
        p -= state.learning_rate * g / np.sqrt(v + state.epsilon)
    params.bump()
    return params
