from __future__ import annotations

import hashlib
import itertools
from typing import Dict, Iterator, Mapping, Tuple

import numpy as np

from app.core.errors import NumericsError, ShapeError

_uids = itertools.count(1)


def check_finite(array: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise NumericsError(f"non-finite values in {what}")
    return array


class ParameterSet:
    """Named float64 tensors with fixed shapes.

    ``version`` moves every time values change in place, so a cache produced
    by a forward pass can tell whether it still matches the parameters.
    """

    def __init__(self, tensors: Mapping[str, np.ndarray] | None = None) -> None:
        self._tensors: Dict[str, np.ndarray] = {}
        self.uid = next(_uids)
        self.version = 0
        for name, value in (tensors or {}).items():
            self.add(name, value)

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self._tensors:
            raise ValueError(f"duplicate parameter name {name!r}")
        self._tensors[name] = np.array(value, dtype=np.float64, copy=True)

    def set(self, name: str, value: np.ndarray) -> None:
        current = self._tensors[name]
        value = np.asarray(value, dtype=np.float64)
        if value.shape != current.shape:
            raise ShapeError(f"{name}: shape {value.shape} != {current.shape}")
        current[...] = value
        self.bump()

    def bump(self) -> None:
        self.version += 1

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __contains__(self, name: object) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self._tensors.items())

    def names(self, prefix: str = "") -> list[str]:
        return [name for name in self._tensors if name.startswith(prefix)]

    @property
    def size(self) -> int:
        return int(sum(t.size for t in self._tensors.values()))

    def copy(self) -> "ParameterSet":
        return type(self)({name: value.copy() for name, value in self._tensors.items()})

    def zeros_like(self) -> "GradBuffer":
        return GradBuffer({name: np.zeros_like(value) for name, value in self._tensors.items()})

    def digest(self) -> str:
        h = hashlib.sha256()
        for name, value in self._tensors.items():
            h.update(name.encode("utf-8"))
            h.update(np.ascontiguousarray(value, dtype="<f8").tobytes())
        return h.hexdigest()

    def allclose(self, other: "ParameterSet", atol: float = 0.0) -> bool:
        if list(self) != list(other):
            return False
        return all(np.allclose(self[n], other[n], rtol=0.0, atol=atol) for n in self)


class GradBuffer(ParameterSet):
    """Gradients laid out like the parameters they belong to."""

    def zero(self) -> None:
        for _, value in self.items():
            value.fill(0.0)

    def accumulate(self, name: str, value: np.ndarray) -> None:
        target = self[name]
        if target.shape != np.shape(value):
            raise ShapeError(f"gradient for {name}: shape {np.shape(value)} != {target.shape}")
        target += value

    def global_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(v * v)) for _, v in self.items())))


def sync_target(params: ParameterSet) -> ParameterSet:
    """Hard copy used as the target network; later updates to ``params`` never reach it."""
    return params.copy()
