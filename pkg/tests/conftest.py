from typing import List

import numpy as np
import pytest

from hmocma.core import ObjectiveVector, Solution
from hmocma.problems import BiObjectiveProblem, make_problem


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20160714)


@pytest.fixture
def bisphere() -> BiObjectiveProblem:
    return make_problem(1, 2, 1)


@pytest.fixture
def bisphere5() -> BiObjectiveProblem:
    return make_problem(1, 5, 1)


def solution(f1: float, f2: float, eval_index: int = 1) -> Solution:
    return Solution(np.zeros(2), ObjectiveVector(f1, f2), eval_index)


def random_front(rng: np.random.Generator, size: int) -> List[ObjectiveVector]:
    """Mutually non-dominated points on a random convex curve, sorted by f1."""
    f1 = np.sort(rng.uniform(0.0, 1.0, size))
    f1 = np.unique(f1)
    f2 = (1.0 - np.sqrt(f1)) ** 2
    return [ObjectiveVector(float(a), float(b)) for a, b in zip(f1, f2)]
