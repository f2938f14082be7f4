from typing import Sequence

import numpy as np
from numpy.typing import NDArray

LOWER = -5.0
UPPER = 5.0


def reflect_into_box(
    x: NDArray[np.float64], lower: float = LOWER, upper: float = UPPER
) -> NDArray[np.float64]:
    """Fold coordinates back into ``[lower, upper]`` by mirror reflection.

    Reflection is periodic, so points several box widths away still land
    inside. Coordinates already inside are returned unchanged.
    """
    x = np.asarray(x, dtype=float)
    width = upper - lower
    t = np.mod(x - lower, 2.0 * width)
    folded = lower + np.where(t > width, 2.0 * width - t, t)
    return np.where((x >= lower) & (x <= upper), x, folded)


def clip_into_box(
    x: NDArray[np.float64], lower: float = LOWER, upper: float = UPPER
) -> NDArray[np.float64]:
    return np.clip(np.asarray(x, dtype=float), lower, upper)


def make_rng(*key: int) -> np.random.Generator:
    """Independent generator for a tuple of non-negative integers.

    Equal keys give bit-identical streams on every platform.
    """
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def spawn_rngs(rng_key: Sequence[int], count: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(list(rng_key)).spawn(count)
    return [np.random.default_rng(child) for child in children]


def counter_rng(*key: int) -> np.random.Generator:
    """Counter-based Philox generator for instance data keyed by ``key``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))
