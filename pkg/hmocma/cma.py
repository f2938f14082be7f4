"""(mu/mu_w, lambda)-CMA-ES with an ask/tell interface, and the restart
wrapper that runs it on randomly weighted scalarizations.

Each restart draws a fresh weight ``alpha ~ U[0, 1]``, a population size
log-uniform between 50 and ``50 * 1.02^(2i)`` and an iteration cap of
``100 * 1.02^i``; the best solution of every finished run is handed back to
the caller for injection elsewhere.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from .core import SearchPoint, Solution
from .logging_config import get_logger
from .problems import Evaluator
from .scalarize import Scalarization
from .utils import reflect_into_box

logger = get_logger(__name__)

LAMBDA_MIN = 50
LAMBDA_GROWTH = 1.02
ITERATION_CAP_BASE = 100
RESTART_SIGMA = 2.0
RESTART_MEAN_BOUND = 4.0
SIGMA_MIN, SIGMA_MAX = 1e-20, 1e4
EIGEN_MIN, EIGEN_MAX = 1e-14, 1e14
SIGMA_STOP = 1e-12
STAGNATION_BASE = 20


@dataclass
class CmaState:
    mean: SearchPoint
    sigma: float
    C: NDArray[np.float64]
    p_sigma: NDArray[np.float64]
    p_c: NDArray[np.float64]
    lam: int
    mu: int
    weights: NDArray[np.float64]
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    rng: np.random.Generator = field(repr=False)
    iteration: int = 0
    B: NDArray[np.float64] = field(init=False, repr=False)
    D: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.B = np.eye(len(self.mean))
        self.D = np.ones(len(self.mean))
        _repair_covariance(self)

    @property
    def n(self) -> int:
        return len(self.mean)

    @property
    def chi_n(self) -> float:
        n = self.n
        return math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))


def make_cma_state(
    mean: SearchPoint,
    sigma: float,
    lam: int,
    rng: np.random.Generator,
    mu: Optional[int] = None,
) -> CmaState:
    """Fresh state with the default strategy constants for ``lam``.

    ``mu`` defaults to ``lam // 2``; weights are ``log(mu + 1/2) - log(i)``
    normalized to sum one.
    """
    n = len(mean)
    if lam < 2:
        raise ValueError(f"lambda must be at least 2, got {lam}")
    mu = lam // 2 if mu is None else mu
    if not 1 <= mu <= lam:
        raise ValueError(f"mu must be in 1..{lam}, got {mu}")
    raw = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_eff = float(1.0 / np.sum(weights**2))
    c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0)
    d_sigma = (
        1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma
    )
    c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n)
    c_1 = 2.0 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(
        1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) ** 2 + mu_eff)
    )
    return CmaState(
        mean=np.array(mean, dtype=float),
        sigma=float(np.clip(sigma, SIGMA_MIN, SIGMA_MAX)),
        C=np.eye(n),
        p_sigma=np.zeros(n),
        p_c=np.zeros(n),
        lam=lam,
        mu=mu,
        weights=weights,
        mu_eff=mu_eff,
        c_sigma=c_sigma,
        d_sigma=d_sigma,
        c_c=c_c,
        c_1=c_1,
        c_mu=c_mu,
        rng=rng,
    )


def _repair_covariance(st: CmaState) -> None:
    """Symmetrize ``C``, clip its spectrum and refresh ``B``/``D``."""
    C = 0.5 * (st.C + st.C.T)
    eigvals, B = np.linalg.eigh(C)
    eigvals = np.clip(eigvals, EIGEN_MIN, EIGEN_MAX)
    st.C = (B * eigvals) @ B.T
    st.B, st.D = B, np.sqrt(eigvals)


def cma_ask(st: CmaState) -> List[SearchPoint]:
    z = st.rng.standard_normal((st.lam, st.n))
    x = st.mean + st.sigma * (z * st.D) @ st.B.T
    return [reflect_into_box(row) for row in x]


def cma_tell(
    st: CmaState, points: Sequence[SearchPoint], fitnesses: Sequence[float]
) -> CmaState:
    if not len(points) == len(fitnesses) == st.lam:
        raise ValueError(
            f"expected {st.lam} points and fitnesses, got "
            f"{len(points)} and {len(fitnesses)}"
        )
    f = np.asarray(fitnesses, dtype=float)
    f = np.where(np.isfinite(f), f, np.inf)
    order = np.argsort(f, kind="stable")[: st.mu]
    selected = np.asarray(points, dtype=float)[order]
    y = (selected - st.mean) / st.sigma
    new_mean = st.weights @ selected
    y_w = (new_mean - st.mean) / st.sigma
    st.mean = new_mean

    inv_sqrt = (st.B / st.D) @ st.B.T
    st.p_sigma = (1.0 - st.c_sigma) * st.p_sigma + math.sqrt(
        st.c_sigma * (2.0 - st.c_sigma) * st.mu_eff
    ) * (inv_sqrt @ y_w)
    ps_norm = float(np.linalg.norm(st.p_sigma))
    correction = math.sqrt(1.0 - (1.0 - st.c_sigma) ** (2 * (st.iteration + 1)))
    h_sig = float(ps_norm / correction < (1.4 + 2.0 / (st.n + 1.0)) * st.chi_n)
    st.p_c = (1.0 - st.c_c) * st.p_c + h_sig * math.sqrt(
        st.c_c * (2.0 - st.c_c) * st.mu_eff
    ) * y_w

    rank_one = np.outer(st.p_c, st.p_c) + (1.0 - h_sig) * st.c_c * (
        2.0 - st.c_c
    ) * st.C
    rank_mu = (y.T * st.weights) @ y
    st.C = (1.0 - st.c_1 - st.c_mu) * st.C + st.c_1 * rank_one + st.c_mu * rank_mu
    _repair_covariance(st)

    st.sigma *= math.exp(st.c_sigma / st.d_sigma * (ps_norm / st.chi_n - 1.0))
    st.sigma = float(np.clip(st.sigma, SIGMA_MIN, SIGMA_MAX))
    st.iteration += 1
    return st


def lambda_from_exponent(i: int, b: float) -> int:
    return int(round(LAMBDA_MIN * LAMBDA_GROWTH ** (i * b)))


def sample_lambda(i: int, rng: np.random.Generator) -> int:
    """``lambda_min * (lambda_max / lambda_min)^b`` with ``b ~ U[0, 2]`` and
    ``lambda_max = lambda_min * 1.02^i``."""
    if i < 0:
        raise ValueError(f"restart index must be non-negative, got {i}")
    return lambda_from_exponent(i, float(rng.uniform(0.0, 2.0)))


def iteration_cap(i: int) -> int:
    return int(round(ITERATION_CAP_BASE * LAMBDA_GROWTH**i))


def stagnation_window(n: int, lam: int) -> int:
    return STAGNATION_BASE + math.ceil(n / lam)


@dataclass
class RestartCmaState:
    restart_index: int
    current: CmaState
    current_alpha: float
    base: Scalarization
    rng: np.random.Generator = field(repr=False)
    best: Optional[Solution] = None
    best_g: float = math.inf
    last_improvement: int = 0
    finished_runs: int = 0

    @property
    def step_cost(self) -> int:
        return self.current.lam

    def g(self, solution: Solution) -> float:
        return self.base.with_alpha(self.current_alpha)(solution.value)


def _new_run(rng: np.random.Generator, n: int, lam: int) -> Tuple[float, CmaState]:
    alpha = float(rng.uniform(0.0, 1.0))
    mean = rng.uniform(-RESTART_MEAN_BOUND, RESTART_MEAN_BOUND, n)
    return alpha, make_cma_state(mean, RESTART_SIGMA, lam, rng)


def restart_cma_init(
    n: int, base: Scalarization, rng: np.random.Generator
) -> RestartCmaState:
    """First run: ``lambda = 50``, random weight and mean, ``sigma = 2``."""
    alpha, st = _new_run(rng, n, sample_lambda(0, rng))
    return RestartCmaState(0, st, alpha, base, rng)


def _run_finished(st: RestartCmaState) -> bool:
    cma = st.current
    if cma.iteration >= iteration_cap(st.restart_index):
        return True
    if cma.sigma < SIGMA_STOP:
        return True
    return cma.iteration - st.last_improvement >= stagnation_window(cma.n, cma.lam)


def _restart(st: RestartCmaState) -> None:
    st.restart_index += 1
    st.current_alpha, st.current = _new_run(
        st.rng, st.current.n, sample_lambda(st.restart_index, st.rng)
    )
    st.best, st.best_g, st.last_improvement = None, math.inf, 0
    st.finished_runs += 1


def restart_cma_step(
    st: RestartCmaState, evaluator: Evaluator, eval_budget_slice: int
) -> Tuple[int, Optional[Solution]]:
    """Advance by whole generations within ``eval_budget_slice`` evaluations.

    Returns the evaluations spent and, when a run terminated, its best
    solution; the next restart is then already prepared.
    """
    used = 0
    while used + st.current.lam <= eval_budget_slice:
        cma = st.current
        solutions = [evaluator(x) for x in cma_ask(cma)]
        used += len(solutions)
        fitness = [st.g(s) for s in solutions]
        cma_tell(cma, [s.point for s in solutions], fitness)
        k = int(np.argmin(fitness))
        if fitness[k] < st.best_g:
            st.best, st.best_g, st.last_improvement = (
                solutions[k],
                fitness[k],
                cma.iteration,
            )
        if _run_finished(st):
            finished = st.best
            logger.debug(
                "Restart CMA-ES run finished",
                restart=st.restart_index,
                alpha=st.current_alpha,
                lam=cma.lam,
                iterations=cma.iteration,
                sigma=cma.sigma,
            )
            _restart(st)
            return used, finished
    return used, None
