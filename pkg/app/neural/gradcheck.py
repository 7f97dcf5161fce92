from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .params import GradBuffer, ParameterSet

LossFn = Callable[[ParameterSet], Tuple[float, GradBuffer]]


@dataclass
class GradCheckReport:
    max_relative_error: float
    worst_name: str
    worst_index: Tuple[int, ...]
    analytic: float
    numeric: float
    checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def grad_check(
    loss_fn: LossFn,
    params: ParameterSet,
    step: float = 1e-5,
    tolerance: float = 1e-4,
    floor: float = 1e-4,
    max_coords_per_tensor: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> GradCheckReport:
    """Central differences per coordinate against the analytic gradient.

    Relative error is |a - n| / max(|a|, |n|, floor); ``floor`` keeps
    coordinates whose gradient is numerically zero from dominating.
    Perturbations run on a private copy, ``params`` is left untouched.
    """
    _, analytic = loss_fn(params)
    shifted = params.copy()
    rng = rng or np.random.default_rng(0)
    worst = GradCheckReport(0.0, "", (), 0.0, 0.0, 0, tolerance)
    checked = 0
    for name, value in shifted.items():
        flat_count = value.size
        coords = np.arange(flat_count)
        if max_coords_per_tensor is not None and flat_count > max_coords_per_tensor:
            coords = np.sort(rng.choice(flat_count, size=max_coords_per_tensor, replace=False))
        for flat in coords:
            index = np.unravel_index(int(flat), value.shape)
            original = value[index]
            value[index] = original + step
            shifted.bump()
            plus, _ = loss_fn(shifted)
            value[index] = original - step
            shifted.bump()
            minus, _ = loss_fn(shifted)
            value[index] = original
            shifted.bump()
            numeric = (plus - minus) / (2.0 * step)
            a = float(analytic[name][index])
            error = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            checked += 1
            if error > worst.max_relative_error or not worst.worst_name:
                worst = GradCheckReport(error, name, tuple(int(i) for i in index), a, numeric, 0, tolerance)
    worst.checked = checked
    return worst
