import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import NonFiniteObjectiveError, ObjectiveVector
from .problems import BiObjectiveProblem, evaluate

NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class Scalarization:
    """Weighted sum ``alpha * f1 / norm1 + (1 - alpha) * f2 / norm2``."""

    alpha: float
    norm1: float
    norm2: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not (self.norm1 >= NORM_FLOOR and self.norm2 >= NORM_FLOOR):
            raise ValueError(f"norms must be >= {NORM_FLOOR}")

    def __call__(self, fv: ObjectiveVector) -> float:
        return g(self, fv)

    def with_alpha(self, alpha: float) -> "Scalarization":
        return Scalarization(alpha, self.norm1, self.norm2)


def make_scalarization(
    p: BiObjectiveProblem, alpha: float, origin: Optional[ObjectiveVector] = None
) -> Scalarization:
    """Scalarization normalized by the objective values at the origin.

    ``origin`` is ``f(0)`` when the caller already paid for it; otherwise it
    is evaluated here.
    """
    if origin is None:
        origin = evaluate(p, np.zeros(p.n))
    if not (math.isfinite(origin[0]) and math.isfinite(origin[1])):
        raise NonFiniteObjectiveError(f"non-finite f(0) = {tuple(origin)}")
    return Scalarization(
        alpha,
        max(abs(origin[0]), NORM_FLOOR),
        max(abs(origin[1]), NORM_FLOOR),
    )


def g(s: Scalarization, fv: ObjectiveVector) -> float:
    return s.alpha * fv[0] / s.norm1 + (1.0 - s.alpha) * fv[1] / s.norm2
