from __future__ import annotations

from typing import Any, Callable, Dict, Mapping

from .base import DecPOMDP, EnvSpec, OracleResult, StepResult, oracle_optimal_return, reset, step
from .lever import LeverCoordination
from .matrix_game import CLIMBING_PAYOFF, MatrixGame
from .predator_prey import PredatorPreyGrid

ENV_REGISTRY: Dict[str, Callable[..., DecPOMDP]] = {
    MatrixGame.env_id: MatrixGame,
    LeverCoordination.env_id: LeverCoordination,
    PredatorPreyGrid.env_id: PredatorPreyGrid,
}


def make_env(name: str, params: Mapping[str, Any] | None = None) -> DecPOMDP:
    try:
        factory = ENV_REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENV_REGISTRY)}") from None
    return factory(**dict(params or {}))


__all__ = [
    "CLIMBING_PAYOFF",
    "DecPOMDP",
    "ENV_REGISTRY",
    "EnvSpec",
    "LeverCoordination",
    "MatrixGame",
    "OracleResult",
    "PredatorPreyGrid",
    "StepResult",
    "make_env",
    "oracle_optimal_return",
    "reset",
    "step",
]
