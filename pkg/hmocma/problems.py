"""Bi-objective test problems built from pairs of single-objective functions.

The ten base functions mirror the five function categories of the BBOB
suite (two per category). Problem ``k`` pairs functions ``(i, j)`` with
``i <= j`` in row-major upper-triangle order, so ``k = 1`` is sphere/sphere
and ``k = 55`` pairs the last function with itself. Instances shift both
optima into ``[-4, 4]^n`` and rotate the non-separable functions; all
instance data comes from a counter-based generator keyed by ``(k, n,
instance)``.
"""

import math
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from .core import (
    ObjectiveVector,
    ParetoArchive,
    SearchPoint,
    Solution,
    hv2d,
)
from .logging_config import get_logger
from .models import NUM_PROBLEMS, ProblemKey, ReferenceData
from .utils import counter_rng

logger = get_logger(__name__)

REF_DIR = os.getenv("HMOCMA_REF_DIR", "refs")
REF_POINT_FACTOR = 1.1
SHIFT_BOUND = 4.0
GALLAGHER_PEAKS = 21


class Category(str, Enum):
    SEPARABLE = "separable"
    MODERATE = "moderate"
    ILL_CONDITIONED = "ill-cond."
    MULTIMODAL = "multimodal"
    WEAK_STRUCTURE = "weakstructure"


class FunctionId(str, Enum):
    SPHERE = "sphere"
    ELLIPSOID = "ellipsoid"
    ATTR_SECTOR = "attr_sector"
    ROSENBROCK = "rosenbrock"
    SHARP_RIDGE = "sharp_ridge"
    DIFF_POWERS = "diff_powers"
    RASTRIGIN = "rastrigin"
    SCHAFFER_LIKE = "schaffer_like"
    GRIEWANK_ROSENBROCK = "griewank_rosenbrock"
    GALLAGHER_LIKE = "gallagher_like"


FUNCTION_ORDER: Tuple[FunctionId, ...] = tuple(FunctionId)

CATEGORIES: Dict[FunctionId, Category] = {
    FunctionId.SPHERE: Category.SEPARABLE,
    FunctionId.ELLIPSOID: Category.SEPARABLE,
    FunctionId.ATTR_SECTOR: Category.MODERATE,
    FunctionId.ROSENBROCK: Category.MODERATE,
    FunctionId.SHARP_RIDGE: Category.ILL_CONDITIONED,
    FunctionId.DIFF_POWERS: Category.ILL_CONDITIONED,
    FunctionId.RASTRIGIN: Category.MULTIMODAL,
    FunctionId.SCHAFFER_LIKE: Category.MULTIMODAL,
    FunctionId.GRIEWANK_ROSENBROCK: Category.WEAK_STRUCTURE,
    FunctionId.GALLAGHER_LIKE: Category.WEAK_STRUCTURE,
}

SEPARABLE_IDS = frozenset({FunctionId.SPHERE, FunctionId.ELLIPSOID})

Evaluator1D = Callable[[NDArray[np.float64]], float]


class NoReferenceError(FileNotFoundError):
    """No reference front is available for a problem."""


class BudgetExceededError(RuntimeError):
    """A component asked for an evaluation beyond the granted budget."""


@dataclass(frozen=True)
class BaseFunction:
    id: FunctionId
    evaluator: Evaluator1D = field(repr=False, compare=False)

    @property
    def category(self) -> Category:
        return CATEGORIES[self.id]

    @property
    def separable(self) -> bool:
        return self.id in SEPARABLE_IDS

    def __call__(self, z: NDArray[np.float64]) -> float:
        return self.evaluator(z)


def _ramp(n: int, exponent: float) -> NDArray[np.float64]:
    return np.asarray(10.0 ** (exponent * np.arange(n) / (n - 1)))


def _rosenbrock_scale(n: int) -> float:
    return max(1.0, math.sqrt(n) / 8.0)


def _sphere(n: int, rng: np.random.Generator) -> Evaluator1D:
    return lambda z: float(np.dot(z, z))


def _ellipsoid(n: int, rng: np.random.Generator) -> Evaluator1D:
    weights = _ramp(n, 6.0)
    return lambda z: float(np.dot(weights, z * z))


def _attr_sector(n: int, rng: np.random.Generator) -> Evaluator1D:
    def f(z: NDArray[np.float64]) -> float:
        s = np.where(z > 0.0, 100.0, 1.0) * z
        return float(np.dot(s, s) ** 0.9)

    return f


def _rosenbrock(n: int, rng: np.random.Generator) -> Evaluator1D:
    scale = _rosenbrock_scale(n)

    def f(z: NDArray[np.float64]) -> float:
        y = scale * z + 1.0
        return float(
            np.sum(100.0 * (y[:-1] ** 2 - y[1:]) ** 2 + (y[:-1] - 1.0) ** 2)
        )

    return f


def _sharp_ridge(n: int, rng: np.random.Generator) -> Evaluator1D:
    return lambda z: float(z[0] ** 2 + 100.0 * math.sqrt(float(np.dot(z[1:], z[1:]))))


def _diff_powers(n: int, rng: np.random.Generator) -> Evaluator1D:
    powers = 2.0 + 4.0 * np.arange(n) / (n - 1)
    return lambda z: float(math.sqrt(float(np.sum(np.abs(z) ** powers))))


def _rastrigin(n: int, rng: np.random.Generator) -> Evaluator1D:
    return lambda z: float(np.sum(z * z + 10.0 * (1.0 - np.cos(2.0 * math.pi * z))))


def _schaffer_like(n: int, rng: np.random.Generator) -> Evaluator1D:
    conditioning = _ramp(n, 0.5)

    def f(z: NDArray[np.float64]) -> float:
        y = conditioning * z
        s = np.sqrt(y[:-1] ** 2 + y[1:] ** 2)
        root = np.sqrt(s)
        return float(np.mean(root + root * np.sin(50.0 * s**0.2) ** 2) ** 2)

    return f


def _griewank_rosenbrock(n: int, rng: np.random.Generator) -> Evaluator1D:
    scale = _rosenbrock_scale(n)

    def f(z: NDArray[np.float64]) -> float:
        y = scale * z + 1.0
        s = 100.0 * (y[:-1] ** 2 - y[1:]) ** 2 + (y[:-1] - 1.0) ** 2
        # s/4000 - cos(s) + 1 per term, so the optimum is exactly zero
        return float(10.0 / (n - 1) * np.sum(s / 4000.0 + (1.0 - np.cos(s))))

    return f


def _gallagher_like(n: int, rng: np.random.Generator) -> Evaluator1D:
    m = GALLAGHER_PEAKS
    peaks = np.vstack([np.zeros(n), rng.uniform(-SHIFT_BOUND, SHIFT_BOUND, (m - 1, n))])
    heights = np.concatenate([[10.0], 1.1 + 8.0 * np.arange(m - 1) / (m - 2)])
    alphas = np.concatenate(
        [[1000.0], 1000.0 ** (2.0 * rng.permutation(m - 1) / (m - 2))]
    )
    conditioning = np.empty((m, n))
    for j in range(m):
        diag = alphas[j] ** (np.arange(n) / (n - 1)) / alphas[j] ** 0.25
        conditioning[j] = rng.permutation(diag)

    def f(z: NDArray[np.float64]) -> float:
        d = z[None, :] - peaks
        quad = np.sum(conditioning * d * d, axis=1)
        best = float(np.max(heights * np.exp(-quad / (2.0 * n))))
        return (10.0 - best) ** 2

    return f


FunctionBuilder = Callable[[int, np.random.Generator], Evaluator1D]

BASE_FUNCTIONS: Dict[FunctionId, FunctionBuilder] = {
    FunctionId.SPHERE: _sphere,
    FunctionId.ELLIPSOID: _ellipsoid,
    FunctionId.ATTR_SECTOR: _attr_sector,
    FunctionId.ROSENBROCK: _rosenbrock,
    FunctionId.SHARP_RIDGE: _sharp_ridge,
    FunctionId.DIFF_POWERS: _diff_powers,
    FunctionId.RASTRIGIN: _rastrigin,
    FunctionId.SCHAFFER_LIKE: _schaffer_like,
    FunctionId.GRIEWANK_ROSENBROCK: _griewank_rosenbrock,
    FunctionId.GALLAGHER_LIKE: _gallagher_like,
}


def make_base_function(
    fid: FunctionId, n: int, rng: Optional[np.random.Generator] = None
) -> BaseFunction:
    """Base function in its own coordinates: optimum 0 at ``z = 0``."""
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    return BaseFunction(fid, BASE_FUNCTIONS[fid](n, rng or counter_rng(0, n)))


def pair_of(k: int) -> Tuple[int, int]:
    """Indices ``(i, j)``, ``i <= j``, of the base functions of problem ``k``."""
    if not 1 <= k <= NUM_PROBLEMS:
        raise ValueError(f"k must be in 1..{NUM_PROBLEMS}, got {k}")
    remaining = k - 1
    count = len(FUNCTION_ORDER)
    for i in range(count):
        row = count - i
        if remaining < row:
            return i, i + remaining
        remaining -= row
    raise AssertionError("unreachable")


def index_of(i: int, j: int) -> int:
    if i > j:
        i, j = j, i
    count = len(FUNCTION_ORDER)
    return sum(count - r for r in range(i)) + (j - i) + 1


def problem_group(k: int) -> str:
    """Category pair label such as ``separable-multimodal``."""
    i, j = pair_of(k)
    return (
        f"{CATEGORIES[FUNCTION_ORDER[i]].value}-{CATEGORIES[FUNCTION_ORDER[j]].value}"
    )


def random_rotation(n: int, rng: np.random.Generator) -> NDArray[np.float64]:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return np.asarray(q * np.sign(np.diag(r)))


@dataclass(frozen=True)
class BiObjectiveProblem:
    k: int
    n: int
    instance: int
    functions: Tuple[BaseFunction, BaseFunction]
    shift1: SearchPoint = field(repr=False)
    shift2: SearchPoint = field(repr=False)
    rot1: NDArray[np.float64] = field(repr=False)
    rot2: NDArray[np.float64] = field(repr=False)
    ref_point: ObjectiveVector = field(init=False)

    def __post_init__(self) -> None:
        origin = _raw_evaluate(self, np.zeros(self.n))
        object.__setattr__(
            self,
            "ref_point",
            ObjectiveVector(REF_POINT_FACTOR * origin[0], REF_POINT_FACTOR * origin[1]),
        )

    @property
    def key(self) -> ProblemKey:
        return ProblemKey(k=self.k, n=self.n, instance=self.instance)

    @property
    def group(self) -> str:
        return problem_group(self.k)


def make_problem(k: int, n: int, instance: int) -> BiObjectiveProblem:
    ProblemKey(k=k, n=n, instance=instance)
    i, j = pair_of(k)
    rng = counter_rng(k, n, instance)
    shift1 = rng.uniform(-SHIFT_BOUND, SHIFT_BOUND, n)
    shift2 = rng.uniform(-SHIFT_BOUND, SHIFT_BOUND, n)
    f1 = make_base_function(FUNCTION_ORDER[i], n, rng)
    f2 = make_base_function(FUNCTION_ORDER[j], n, rng)
    rot1 = np.eye(n) if f1.separable else random_rotation(n, rng)
    rot2 = np.eye(n) if f2.separable else random_rotation(n, rng)
    return BiObjectiveProblem(k, n, instance, (f1, f2), shift1, shift2, rot1, rot2)


def _raw_evaluate(p: BiObjectiveProblem, x: NDArray[np.float64]) -> ObjectiveVector:
    g1, g2 = p.functions
    return ObjectiveVector.checked(
        g1(p.rot1 @ (x - p.shift1)), g2(p.rot2 @ (x - p.shift2))
    )


def evaluate(p: BiObjectiveProblem, x: SearchPoint) -> ObjectiveVector:
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise ValueError(f"expected a point of dimension {p.n}, got shape {x.shape}")
    return _raw_evaluate(p, x)


def bisphere_reference(distance: float, ref: ObjectiveVector) -> float:
    """Exact hypervolume of the sphere/sphere front ``f2 = (d - sqrt(f1))^2``
    with respect to ``ref``."""
    d = distance
    r1, r2 = ref
    lo = max(0.0, d - math.sqrt(r2)) ** 2
    hi = min(r1, d * d)

    def antiderivative(u: float) -> float:
        return (r2 - d * d) * u + 4.0 / 3.0 * d * u**1.5 - u * u / 2.0

    curved = antiderivative(hi) - antiderivative(lo) if hi > lo else 0.0
    return curved + r2 * max(0.0, r1 - d * d)


def reference_path(key: ProblemKey, ref_dir: Optional[Path] = None) -> Path:
    return Path(ref_dir or REF_DIR) / f"{key.stem()}.ref"


def parse_reference(lines: List[str], n: int) -> ParetoArchive:
    if not lines or not lines[0].startswith("ref_point"):
        raise ValueError("reference file must start with a 'ref_point r1 r2' line")
    parts = lines[0].split()
    ref = ObjectiveVector.checked(float(parts[1]), float(parts[2]))
    return ParetoArchive.from_lines(lines[1:], ref, n)


def reference_data(
    p: BiObjectiveProblem, ref_dir: Optional[Path] = None
) -> ReferenceData:
    if all(g.id is FunctionId.SPHERE for g in p.functions):
        distance = float(np.linalg.norm(p.shift1 - p.shift2))
        return ReferenceData(
            ref_point=p.ref_point,
            ref_hv=bisphere_reference(distance, p.ref_point),
            source="analytic",
        )

    path = reference_path(p.key, ref_dir)
    if not path.exists():
        raise NoReferenceError(f"no reference front for {p.key.stem()} at {path}")
    archive = parse_reference(path.read_text().splitlines(), p.n)
    ref_hv = hv2d(archive.front(), p.ref_point)
    logger.info("Loaded reference front", problem=p.key.stem(), members=len(archive))
    return ReferenceData(ref_point=p.ref_point, ref_hv=ref_hv, source="long_run")


class Evaluator:
    """Counting evaluation wrapper shared by all components of one run.

    Every call charges the account selected with :meth:`charging`, stamps a
    1-based evaluation index, offers the solution to the archive and extends
    the hypervolume trace when the archive hypervolume grows.
    """

    def __init__(
        self,
        problem: BiObjectiveProblem,
        archive: Optional[ParetoArchive] = None,
        budget: Optional[int] = None,
    ):
        self.problem = problem
        self.archive = archive
        self.budget = budget
        self.count = 0
        self.account = "default"
        self.ledgers: Dict[str, int] = {}
        self.trace: List[Tuple[int, float]] = []

    @property
    def n(self) -> int:
        return self.problem.n

    @property
    def remaining(self) -> float:
        return math.inf if self.budget is None else self.budget - self.count

    @contextmanager
    def charging(self, account: str) -> Iterator["Evaluator"]:
        previous, self.account = self.account, account
        try:
            yield self
        finally:
            self.account = previous

    def __call__(self, x: SearchPoint) -> Solution:
        if self.budget is not None and self.count >= self.budget:
            raise BudgetExceededError(
                f"{self.account} requested evaluation {self.count + 1} "
                f"beyond budget {self.budget}"
            )
        point = np.array(x, dtype=float)
        value = evaluate(self.problem, point)
        self.count += 1
        self.ledgers[self.account] = self.ledgers.get(self.account, 0) + 1
        solution = Solution(point, value, self.count)
        if self.archive is not None and self.archive.insert(solution):
            last = self.trace[-1][1] if self.trace else 0.0
            if self.archive.hv > last:
                self.trace.append((self.count, self.archive.hv))
        return solution
