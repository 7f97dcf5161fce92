"""State keys for episodic memory: a fixed Gaussian projection s -> Vs followed
by quantization, so that equal (projected) states hash to equal keys."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from app.core.errors import ShapeError


@dataclass(frozen=True)
class ProjectionMatrix:
    matrix: np.ndarray  # (D, F)
    seed: Optional[int] = None

    @property
    def projected_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def state_dim(self) -> int:
        return self.matrix.shape[1]

    @staticmethod
    def gaussian(projected_dim: int, state_dim: int, seed: int) -> "ProjectionMatrix":
        rng = np.random.default_rng(seed)
        return ProjectionMatrix(rng.standard_normal((projected_dim, state_dim)), seed)

    @staticmethod
    def identity(state_dim: int) -> "ProjectionMatrix":
        return ProjectionMatrix(np.eye(state_dim))


@dataclass(frozen=True)
class MemoryKey:
    codes: Tuple[int, ...]
    scale: float

    @property
    def components(self) -> Tuple[float, ...]:
        return tuple(code / self.scale for code in self.codes)


def _scale_for(quantization: float) -> float:
    if quantization <= 0.0:
        raise ValueError("quantization resolution must be positive")
    scale = 1.0 / quantization
    rounded = float(round(scale))
    # 1e-6 -> exactly 1e6, so codes / scale reproduces decimal inputs
    return rounded if rounded > 0 and abs(scale - rounded) <= 1e-9 * rounded else scale


def quantize(values: np.ndarray, quantization: float) -> np.ndarray:
    return np.rint(np.asarray(values, dtype=np.float64) * _scale_for(quantization)).astype(np.int64)


def _projected(states: np.ndarray, projection: Optional[ProjectionMatrix]) -> np.ndarray:
    # elementwise product + last-axis sum: the same rounding for a state whatever the batch around it
    if projection is None:
        return states
    return (states[:, None, :] * projection.matrix[None, :, :]).sum(axis=-1)


def project(state: np.ndarray, projection: Optional[ProjectionMatrix], quantization: float = 1e-6) -> MemoryKey:
    state = np.asarray(state, dtype=np.float64)
    if projection is not None and state.shape != (projection.state_dim,):
        raise ShapeError(f"state shape {state.shape} does not match projection input {projection.state_dim}")
    codes = quantize(_projected(state.reshape(1, -1), projection)[0], quantization)
    return MemoryKey(tuple(int(c) for c in codes), _scale_for(quantization))


class StateKeyer:
    """Maps global states to memory keys for one run; the projection never changes."""

    def __init__(
        self,
        state_dim: int,
        projection_dim: int = 4,
        quantization: float = 1e-6,
        use_projection: bool = True,
        seed: int = 0,
        projection: Optional[ProjectionMatrix] = None,
    ) -> None:
        self.state_dim = state_dim
        self.quantization = quantization
        self.scale = _scale_for(quantization)
        if projection is None and use_projection:
            projection = ProjectionMatrix.gaussian(projection_dim, state_dim, seed)
        self.projection = projection

    @property
    def key_dim(self) -> int:
        return self.projection.projected_dim if self.projection is not None else self.state_dim

    def key(self, state: np.ndarray) -> MemoryKey:
        return project(state, self.projection, self.quantization)

    def keys(self, states: np.ndarray) -> List[MemoryKey]:
        """Keys for a stack of states, shape (..., F); returned flat in C order."""
        states = np.asarray(states, dtype=np.float64).reshape(-1, self.state_dim)
        codes = np.rint(_projected(states, self.projection) * self.scale).astype(np.int64)
        return [MemoryKey(tuple(int(c) for c in row), self.scale) for row in codes]
