"""Multi-objective CMA-ES with per-individual step sizes and covariances.

Two flavours share the individual and its success-based updates:

* steady state (mu + 1): one offspring per iteration, a population that
  grows by one every ``50n`` iterations, occasional blend crossover and
  externally injected candidates;
* generational with IPOP restarts: every parent produces one offspring, and
  every ``50n`` generations the population restarts at twice its size.

Survival in both is decided by :func:`hmocma.core.hv_select` against the
problem's reference point.
"""

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .core import ObjectiveVector, SearchPoint, Solution, hv_rank_order, hv_select
from .logging_config import get_logger
from .problems import Evaluator
from .utils import reflect_into_box

logger = get_logger(__name__)

P_TARGET = 0.181
C_P = 1.0 / 12.0
P_THRESH = 0.44
SIGMA_MIN, SIGMA_MAX = 1e-20, 1e4
EIGEN_MIN, EIGEN_MAX = 1e-14, 1e14

SS_BASE_SIZE = 5
SS_SIGMA0 = 0.5
GROWTH_PERIOD_FACTOR = 50
CROSSOVER_PROB = 0.1
CROSSOVER_MEAN = 0.5
CROSSOVER_STD = 0.5

IPOP_BASE_SIZE = 10
IPOP_SIGMA0 = 2.0
IPOP_INIT_BOUND = 4.0


@dataclass
class MoIndividual:
    x: SearchPoint
    value: Optional[ObjectiveVector]
    sigma: float
    C: NDArray[np.float64] = field(repr=False)
    p_succ: float = P_TARGET
    p_c: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0), repr=False)
    eval_index: int = 0
    A: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.p_c) != len(self.x):
            self.p_c = np.zeros(len(self.x))
        _repair(self)

    def copy(self) -> "MoIndividual":
        return replace(self, x=self.x.copy(), C=self.C.copy(), p_c=self.p_c.copy())

    def as_solution(self) -> Solution:
        if self.value is None:
            raise ValueError("individual has not been evaluated")
        return Solution(self.x.copy(), self.value, self.eval_index)


def from_solution(s: Solution, sigma: float) -> MoIndividual:
    n = len(s.point)
    ind = MoIndividual(np.array(s.point, dtype=float), s.value, sigma, np.eye(n))
    ind.eval_index = s.eval_index
    return ind


def _repair(ind: MoIndividual) -> None:
    """Keep ``C`` symmetric positive definite and refresh its square root."""
    C = 0.5 * (ind.C + ind.C.T)
    eigvals, B = np.linalg.eigh(C)
    eigvals = np.clip(eigvals, EIGEN_MIN, EIGEN_MAX)
    ind.C = (B * eigvals) @ B.T
    ind.A = B * np.sqrt(eigvals)
    ind.sigma = float(np.clip(ind.sigma, SIGMA_MIN, SIGMA_MAX))


def update_step_size(ind: MoIndividual, success: bool) -> None:
    n = len(ind.x)
    damping = 1.0 + n / 2.0
    ind.p_succ = (1.0 - C_P) * ind.p_succ + C_P * float(success)
    ind.sigma *= math.exp((ind.p_succ - P_TARGET) / (damping * (1.0 - P_TARGET)))
    ind.sigma = float(np.clip(ind.sigma, SIGMA_MIN, SIGMA_MAX))


def update_covariance(ind: MoIndividual, step: NDArray[np.float64]) -> None:
    """Rank-one update with ``step = (x_child - x_parent) / sigma_parent``."""
    n = len(ind.x)
    c_c = 2.0 / (n + 2.0)
    c_cov = 2.0 / (n * n + 6.0)
    if ind.p_succ < P_THRESH:
        ind.p_c = (1.0 - c_c) * ind.p_c + math.sqrt(c_c * (2.0 - c_c)) * step
        ind.C = (1.0 - c_cov) * ind.C + c_cov * np.outer(ind.p_c, ind.p_c)
    else:
        ind.p_c = (1.0 - c_c) * ind.p_c
        ind.C = (1.0 - c_cov) * ind.C + c_cov * (
            np.outer(ind.p_c, ind.p_c) + c_c * (2.0 - c_c) * ind.C
        )
    _repair(ind)


def mutate(parent: MoIndividual, rng: np.random.Generator) -> MoIndividual:
    child = parent.copy()
    z = rng.standard_normal(len(parent.x))
    child.x = reflect_into_box(parent.x + parent.sigma * (parent.A @ z))
    child.value, child.eval_index = None, 0
    return child


def crossover(
    a: MoIndividual,
    b: MoIndividual,
    rng: np.random.Generator,
    std: float = CROSSOVER_STD,
    c: Optional[float] = None,
) -> MoIndividual:
    """Blend ``a.x + c (b.x - a.x)`` with ``c ~ N(1/2, std^2)``; the child
    averages the parents' step sizes and covariances."""
    if len(a.x) != len(b.x):
        raise ValueError("crossover parents differ in dimension")
    if c is None:
        c = float(rng.normal(CROSSOVER_MEAN, std))
    x = reflect_into_box(a.x + c * (b.x - a.x))
    return MoIndividual(x, None, (a.sigma + b.sigma) / 2.0, (a.C + b.C) / 2.0)


def _evaluate(ind: MoIndividual, evaluator: Evaluator) -> None:
    solution = evaluator(ind.x)
    ind.value, ind.eval_index = solution.value, solution.eval_index


def _values(population: Sequence[MoIndividual]) -> List[ObjectiveVector]:
    values = []
    for ind in population:
        assert ind.value is not None
        values.append(ind.value)
    return values


@dataclass
class SsMoState:
    population: List[MoIndividual]
    n: int
    ref_point: ObjectiveVector
    rng: np.random.Generator = field(repr=False)
    iteration: int = 0
    base_size: int = SS_BASE_SIZE
    crossover_prob: float = CROSSOVER_PROB
    crossover_std: float = CROSSOVER_STD

    @property
    def growth_period(self) -> int:
        return GROWTH_PERIOD_FACTOR * self.n

    def expected_size(self) -> int:
        return self.base_size + self.iteration // self.growth_period


def ss_init(
    seeds: Sequence[Solution],
    evaluator: Evaluator,
    rng: np.random.Generator,
    ref_point: Optional[ObjectiveVector] = None,
) -> SsMoState:
    """Population of the five best distinct seeds by front rank and hv
    contribution, padded with evaluated perturbations of the best one."""
    if not seeds:
        raise ValueError("ss_init needs at least one seed")
    ref = ref_point if ref_point is not None else evaluator.problem.ref_point
    distinct: List[Solution] = []
    seen = set()
    for s in seeds:
        if s.value not in seen:
            seen.add(s.value)
            distinct.append(s)
    order = hv_rank_order([s.value for s in distinct], ref)
    population = [from_solution(distinct[j], SS_SIGMA0) for j in order[:SS_BASE_SIZE]]
    best = population[0]
    while len(population) < SS_BASE_SIZE:
        clone = MoIndividual(
            reflect_into_box(best.x + SS_SIGMA0 * rng.standard_normal(len(best.x))),
            None,
            SS_SIGMA0,
            np.eye(len(best.x)),
        )
        _evaluate(clone, evaluator)
        population.append(clone)
    return SsMoState(population, evaluator.n, ref, rng)


def ss_step(
    st: SsMoState, evaluator: Evaluator, injected: Optional[Solution] = None
) -> int:
    """One steady-state iteration; returns the evaluations charged (0 or 1)."""
    used = 0
    parent: Optional[MoIndividual] = None
    if injected is not None:
        child = from_solution(injected, SS_SIGMA0)
    else:
        if len(st.population) > 1 and st.rng.random() < st.crossover_prob:
            i, j = st.rng.choice(len(st.population), size=2, replace=False)
            child = crossover(
                st.population[i], st.population[j], st.rng, st.crossover_std
            )
        else:
            parent = st.population[int(st.rng.integers(len(st.population)))]
            child = mutate(parent, st.rng)
        _evaluate(child, evaluator)
        used = 1

    union = st.population + [child]
    survivors = hv_select(_values(union), len(st.population), st.ref_point)
    success = len(union) - 1 in survivors
    if parent is not None:
        step = (child.x - parent.x) / parent.sigma
        update_step_size(parent, success)
        update_step_size(child, success)
        if success:
            update_covariance(child, step)
    else:
        update_step_size(child, success)
    st.population = [union[k] for k in survivors]

    st.iteration += 1
    if st.iteration % st.growth_period == 0:
        clone = st.population[int(st.rng.integers(len(st.population)))].copy()
        clone.sigma = SS_SIGMA0
        st.population.append(clone)
        logger.debug("Steady-state population grew", size=len(st.population))
    return used


@dataclass
class IpopMoState:
    population: List[MoIndividual]
    n: int
    ref_point: ObjectiveVector
    rng: np.random.Generator = field(repr=False)
    restart_count: int = 0
    generation: int = 0

    @property
    def pop_size(self) -> int:
        return IPOP_BASE_SIZE * 2**self.restart_count

    @property
    def restart_period(self) -> int:
        return GROWTH_PERIOD_FACTOR * self.n

    @property
    def restart_due(self) -> bool:
        return self.generation >= self.restart_period

    @property
    def step_cost(self) -> int:
        return 2 * self.pop_size if self.restart_due else self.pop_size


def _fresh_population(
    size: int,
    evaluator: Evaluator,
    rng: np.random.Generator,
) -> List[MoIndividual]:
    """Up to ``size // 2`` members of the shared archive that carry search
    points, topped up with evaluated uniform points to ``size``."""
    n = evaluator.n
    population: List[MoIndividual] = []
    archive = evaluator.archive
    if archive is not None and len(archive):
        pool = [m for m in archive.members if not np.any(np.isnan(m.point))]
        if pool:
            picks = rng.choice(len(pool), size=min(size // 2, len(pool)), replace=False)
            population += [from_solution(pool[int(k)], IPOP_SIGMA0) for k in picks]
    while len(population) < size:
        x = rng.uniform(-IPOP_INIT_BOUND, IPOP_INIT_BOUND, n)
        ind = MoIndividual(x, None, IPOP_SIGMA0, np.eye(n))
        _evaluate(ind, evaluator)
        population.append(ind)
    return population


def ipop_init(
    evaluator: Evaluator,
    rng: np.random.Generator,
    ref_point: Optional[ObjectiveVector] = None,
) -> IpopMoState:
    ref = ref_point if ref_point is not None else evaluator.problem.ref_point
    population = _fresh_population(IPOP_BASE_SIZE, evaluator, rng)
    return IpopMoState(population, evaluator.n, ref, rng)


def ipop_step(st: IpopMoState, evaluator: Evaluator) -> int:
    """One generation, or a restart at twice the size when one is due.

    A generation charges ``pop_size``; a restart charges at most the new size,
    less the members seeded from the archive.
    """
    if st.restart_due:
        st.restart_count += 1
        st.generation = 0
        before = evaluator.count
        st.population = _fresh_population(st.pop_size, evaluator, st.rng)
        logger.info(
            "IPOP-MO-CMA-ES restarted",
            restart=st.restart_count,
            pop_size=st.pop_size,
            evals=evaluator.count,
        )
        return evaluator.count - before

    parents = st.population
    children = [mutate(parent, st.rng) for parent in parents]
    for child in children:
        _evaluate(child, evaluator)
    union = parents + children
    survivors = set(hv_select(_values(union), st.pop_size, st.ref_point))
    for k, (parent, child) in enumerate(zip(parents, children)):
        success = len(parents) + k in survivors
        step = (child.x - parent.x) / parent.sigma
        update_step_size(parent, success)
        update_step_size(child, success)
        if success:
            update_covariance(child, step)
    st.population = [union[k] for k in sorted(survivors)]
    st.generation += 1
    return len(children)
