"""The hybrid conductor: a warm start, then steady-state MO-CMA-ES joined by
restart CMA-ES and finally by IPOP-MO-CMA-ES, all sharing one evaluation
budget and one archive.

Components take turns of one atomic step each (one ss iteration, one
CMA-ES generation, one IPOP generation). The next turn goes to the active
component that has spent the fewest evaluations since the most recent
component launch, so shares equalize in evaluations rather than turns.
"""

from collections import deque
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Deque, Dict, List, Optional, Tuple

import numpy as np

from .cma import LAMBDA_MIN, RestartCmaState, restart_cma_init, restart_cma_step
from .core import ParetoArchive, Solution
from .logging_config import get_logger
from .mocma import (
    IPOP_BASE_SIZE,
    SS_BASE_SIZE,
    IpopMoState,
    SsMoState,
    ipop_init,
    ipop_step,
    ss_init,
    ss_step,
)
from .models import ReferenceData, RunRecord
from .problems import (
    BiObjectiveProblem,
    Evaluator,
    NoReferenceError,
    reference_data,
)
from .scalarize import Scalarization, make_scalarization
from .utils import spawn_rngs
from .warmstart import run_warmstart

logger = get_logger(__name__)

WARMSTART = "warmstart"
SS = "ss"
RESTART_CMA = "restart_cma"
IPOP = "ipop"
COMPONENTS = (WARMSTART, SS, RESTART_CMA, IPOP)


class Phase(str, Enum):
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    P4 = "P4"


@dataclass(frozen=True)
class HybridSchedule:
    warmstart_factor: int = 10
    ss_only_until_factor: int = 1000
    ipop_from_factor: int = 20000
    share_factor: int = 400000
    scale_caps: bool = False
    ipop_injection_prob: float = 0.1

    def cap(self, n: int, budget: int) -> int:
        """Per-component evaluation cap; optionally scaled to the budget."""
        share = self.share_factor * n
        if self.scale_caps:
            full = 3 * share
            if budget < full:
                return max(1, share * budget // full)
        return share


DEFAULT_SCHEDULE = HybridSchedule()


def run_key(p: BiObjectiveProblem, seed: int) -> Tuple[int, ...]:
    return (seed, p.k, p.n, p.instance)


def phase_of(
    evals: int, n: int, schedule: HybridSchedule = DEFAULT_SCHEDULE
) -> Phase:
    if evals < 0:
        raise ValueError(f"evals must be non-negative, got {evals}")
    if evals < schedule.warmstart_factor * n:
        return Phase.P1
    if evals < schedule.ss_only_until_factor * n:
        return Phase.P2
    if evals < schedule.ipop_from_factor * n:
        return Phase.P3
    return Phase.P4


ACTIVE: Dict[Phase, Tuple[str, ...]] = {
    Phase.P1: (WARMSTART,),
    Phase.P2: (SS,),
    Phase.P3: (SS, RESTART_CMA),
    Phase.P4: (SS, RESTART_CMA, IPOP),
}


def try_reference(
    p: BiObjectiveProblem, ref_dir: Optional[Path] = None
) -> Optional[ReferenceData]:
    try:
        return reference_data(p, ref_dir)
    except NoReferenceError as e:
        logger.warning(
            "No reference data, targets disabled",
            problem=p.key.stem(),
            error=str(e),
        )
        return None


def make_record(
    p: BiObjectiveProblem,
    seed: int,
    budget: int,
    algo: str,
    evaluator: Evaluator,
    ref: Optional[ReferenceData],
) -> RunRecord:
    return RunRecord(
        problem=p.key,
        seed=seed,
        budget=budget,
        algo=algo,
        ref_point=p.ref_point,
        ref_hv=ref.ref_hv if ref else None,
        ref_source=ref.source if ref else None,
        total_evals=evaluator.count,
        ledgers=dict(evaluator.ledgers),
        trace=list(evaluator.trace),
    )


class Hybrid:
    """One hybrid run over a shared archive and evaluation budget."""

    def __init__(
        self,
        p: BiObjectiveProblem,
        budget: int,
        seed: int,
        schedule: HybridSchedule = DEFAULT_SCHEDULE,
    ):
        if budget < p.n + 2:
            raise ValueError(f"budget must be at least n+2={p.n + 2}, got {budget}")
        self.problem = p
        self.budget = budget
        self.seed = seed
        self.schedule = schedule
        self.archive = ParetoArchive(p.ref_point)
        self.evaluator = Evaluator(p, self.archive, budget)
        for name in COMPONENTS:
            self.evaluator.ledgers[name] = 0
        self.cap = schedule.cap(p.n, budget)
        self.ss_rng, self.cma_rng, self.ipop_rng, self.rng = spawn_rngs(
            run_key(p, seed), 4
        )
        self.injection_queue_ss: Deque[Solution] = deque()
        self.warm: List[Solution] = []
        self.base: Optional[Scalarization] = None
        self.ss: Optional[SsMoState] = None
        self.restart_cma: Optional[RestartCmaState] = None
        self.ipop: Optional[IpopMoState] = None
        self._baseline: Dict[str, int] = {}
        self._phase = Phase.P1

    @property
    def total_evals(self) -> int:
        return self.evaluator.count

    @property
    def ledgers(self) -> Dict[str, int]:
        return self.evaluator.ledgers

    @property
    def phase(self) -> Phase:
        return phase_of(self.total_evals, self.problem.n, self.schedule)

    @property
    def remaining(self) -> int:
        return self.budget - self.total_evals

    def _step_cost(self, name: str) -> int:
        if name == SS:
            if self.ss is None:
                return max(0, SS_BASE_SIZE - len({s.value for s in self.warm}))
            return 1
        if name == RESTART_CMA:
            if self.restart_cma is None:
                return LAMBDA_MIN
            return self.restart_cma.step_cost
        if self.ipop is not None:
            return self.ipop.step_cost
        return IPOP_BASE_SIZE

    def _can_act(self, name: str) -> bool:
        cost = self._step_cost(name)
        return cost <= self.remaining and self.ledgers[name] + cost <= self.cap

    def _launch(self, name: str) -> None:
        self._baseline = dict(self.ledgers)
        logger.info(
            "Launching component",
            component=name,
            phase=self.phase.value,
            evals=self.total_evals,
        )

    def _next_component(self) -> Optional[str]:
        candidates = [c for c in ACTIVE[self.phase] if self._can_act(c)]
        if not candidates:
            return None
        return min(
            candidates, key=lambda c: self.ledgers[c] - self._baseline.get(c, 0)
        )

    def _ss_turn(self) -> None:
        if self.ss is None:
            self._launch(SS)
            self.ss = ss_init(self.warm, self.evaluator, self.ss_rng)
            return
        if (
            self.phase is Phase.P4
            and self.ipop is not None
            and self.rng.random() < self.schedule.ipop_injection_prob
        ):
            members = self.ipop.population
            pick = members[int(self.rng.integers(len(members)))]
            self.injection_queue_ss.append(pick.as_solution())
        queue = self.injection_queue_ss
        injected = queue.popleft() if queue else None
        ss_step(self.ss, self.evaluator, injected)

    def _restart_cma_turn(self) -> None:
        if self.restart_cma is None:
            self._launch(RESTART_CMA)
            assert self.base is not None
            self.restart_cma = restart_cma_init(
                self.problem.n, self.base, self.cma_rng
            )
        _, finished = restart_cma_step(
            self.restart_cma, self.evaluator, self.restart_cma.step_cost
        )
        if finished is not None:
            self.injection_queue_ss.append(finished)

    def _ipop_turn(self) -> None:
        if self.ipop is None:
            self._launch(IPOP)
            self.ipop = ipop_init(self.evaluator, self.ipop_rng)
            return
        ipop_step(self.ipop, self.evaluator)

    def run(self) -> "Hybrid":
        n = self.problem.n
        warm_budget = min(self.schedule.warmstart_factor * n, self.budget)
        with self.evaluator.charging(WARMSTART):
            self.warm = run_warmstart(self.problem, warm_budget, self.evaluator)
        self.base = make_scalarization(self.problem, 0.5, self.warm[0].value)

        turns = {
            SS: self._ss_turn,
            RESTART_CMA: self._restart_cma_turn,
            IPOP: self._ipop_turn,
        }
        while self.remaining > 0:
            phase = self.phase
            if phase is not self._phase:
                logger.info("Phase change", phase=phase.value, evals=self.total_evals)
                self._phase = phase
            name = self._next_component()
            if name is None:
                break
            with self.evaluator.charging(name):
                turns[name]()

        logger.info(
            "Hybrid run finished",
            problem=self.problem.key.stem(),
            seed=self.seed,
            evals=self.total_evals,
            archive=len(self.archive),
            hv=self.archive.hv,
        )
        return self

    def record(self, ref: Optional[ReferenceData] = None) -> RunRecord:
        return make_record(
            self.problem, self.seed, self.budget, "hybrid", self.evaluator, ref
        )


def hybrid_run(
    p: BiObjectiveProblem,
    budget: int,
    seed: int,
    schedule: HybridSchedule = DEFAULT_SCHEDULE,
    ref: Optional[ReferenceData] = None,
) -> RunRecord:
    return Hybrid(p, budget, seed, schedule).run().record(ref or try_reference(p))


def component_run(
    p: BiObjectiveProblem,
    algo: str,
    budget: int,
    seed: int,
    ref: Optional[ReferenceData] = None,
) -> Tuple[RunRecord, ParetoArchive]:
    """Run one component alone on the full budget, for ablations."""
    if algo == "hybrid":
        h = Hybrid(p, budget, seed).run()
        return h.record(ref or try_reference(p)), h.archive

    if budget < max(p.n + 2, IPOP_BASE_SIZE):
        raise ValueError(f"budget {budget} is too small for a component run")
    archive = ParetoArchive(p.ref_point)
    evaluator = Evaluator(p, archive, budget)
    rng = spawn_rngs(run_key(p, seed), 1)[0]
    if algo == "warmstart":
        with evaluator.charging(WARMSTART):
            run_warmstart(p, budget, evaluator)
    elif algo == "ss-mocma":
        with evaluator.charging(SS):
            st = ss_init([evaluator(np.zeros(p.n))], evaluator, rng)
            while evaluator.remaining > 0:
                ss_step(st, evaluator)
    elif algo == "ipop-mocma":
        with evaluator.charging(IPOP):
            ipop = ipop_init(evaluator, rng)
            while ipop.step_cost <= evaluator.remaining:
                ipop_step(ipop, evaluator)
    elif algo == "restart-cma":
        with evaluator.charging(RESTART_CMA):
            rc = restart_cma_init(p.n, make_scalarization(p, 0.5), rng)
            while rc.step_cost <= evaluator.remaining:
                restart_cma_step(rc, evaluator, rc.step_cost)
    else:
        raise ValueError(f"unknown algorithm {algo!r}")
    logger.info(
        "Component run finished",
        algo=algo,
        problem=p.key.stem(),
        seed=seed,
        evals=evaluator.count,
    )
    record = make_record(p, seed, budget, algo, evaluator, ref or try_reference(p))
    return record, archive


def anytime_trace(record: RunRecord) -> List[Tuple[int, float]]:
    """``(eval_index, hv_diff)`` pairs, starting from the empty archive."""
    if record.ref_hv is None:
        raise ValueError("record has no reference hypervolume")
    trace = [(0, record.ref_hv)]
    trace += [(evals, record.ref_hv - hv) for evals, hv in record.trace]
    return trace
