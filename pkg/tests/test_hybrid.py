from typing import List, Optional, Tuple

import numpy as np
import pytest

from hmocma import hybrid
from hmocma.bench import dumps_record
from hmocma.cma import LAMBDA_GROWTH, LAMBDA_MIN, restart_cma_step
from hmocma.core import Solution, hv2d
from hmocma.hybrid import (
    ACTIVE,
    COMPONENTS,
    DEFAULT_SCHEDULE,
    IPOP,
    RESTART_CMA,
    SS,
    WARMSTART,
    Hybrid,
    HybridSchedule,
    Phase,
    anytime_trace,
    component_run,
    hybrid_run,
    phase_of,
)
from hmocma.mocma import ss_step
from hmocma.problems import BiObjectiveProblem, make_problem, reference_data
from hmocma.warmstart import run_warmstart

# thresholds scaled down so every phase is reached within a few thousand evaluations
QUICK = HybridSchedule(ss_only_until_factor=100, ipop_from_factor=300)


def test_phase_boundaries() -> None:
    n = 5
    assert phase_of(0, n) is Phase.P1
    assert phase_of(49, n) is Phase.P1
    assert phase_of(50, n) is Phase.P2
    assert phase_of(4999, n) is Phase.P2
    assert phase_of(5000, n) is Phase.P3
    assert phase_of(99999, n) is Phase.P3
    assert phase_of(100000, n) is Phase.P4
    with pytest.raises(ValueError):
        phase_of(-1, n)


def test_active_components_per_phase() -> None:
    assert ACTIVE[Phase.P1] == (WARMSTART,)
    assert ACTIVE[Phase.P2] == (SS,)
    assert ACTIVE[Phase.P3] == (SS, RESTART_CMA)
    assert ACTIVE[Phase.P4] == (SS, RESTART_CMA, IPOP)


def test_component_caps() -> None:
    assert DEFAULT_SCHEDULE.cap(5, 5000) == 2_000_000
    scaled = HybridSchedule(scale_caps=True)
    assert scaled.cap(5, 6_000_000) == 2_000_000
    assert scaled.cap(5, 600_000) == 200_000


def test_budget_below_warm_start_minimum(bisphere: BiObjectiveProblem) -> None:
    with pytest.raises(ValueError):
        Hybrid(bisphere, 3, 0)


def test_short_run_is_warm_start_then_steady_state(
    bisphere: BiObjectiveProblem,
) -> None:
    h = Hybrid(bisphere, 2000, seed=0).run()
    assert h.total_evals == 2000
    assert h.ledgers == {WARMSTART: 20, SS: 1980, RESTART_CMA: 0, IPOP: 0}
    assert h.restart_cma is None and h.ipop is None


def test_all_phases_share_the_budget(bisphere: BiObjectiveProblem) -> None:
    h = Hybrid(bisphere, 3000, seed=1, schedule=QUICK).run()
    assert h.phase is Phase.P4
    assert h.total_evals == 3000
    assert sum(h.ledgers.values()) == h.total_evals
    assert set(h.ledgers) == set(COMPONENTS)
    assert h.ledgers[WARMSTART] == 20
    assert all(h.ledgers[c] > 0 for c in (SS, RESTART_CMA, IPOP))
    assert h.archive.hv == pytest.approx(hv2d(h.archive.front(), bisphere.ref_point))


def test_deficit_scheduling_balances_evaluations(
    bisphere: BiObjectiveProblem,
) -> None:
    schedule = HybridSchedule(ss_only_until_factor=100, ipop_from_factor=10**6)
    h = Hybrid(bisphere, 4200, seed=2, schedule=schedule).run()
    assert h.restart_cma is not None
    ss_share = h.ledgers[SS] - h._baseline[SS]
    cma_share = h.ledgers[RESTART_CMA]
    # one CMA-ES generation is the largest possible imbalance
    largest = round(LAMBDA_MIN * LAMBDA_GROWTH ** (2 * h.restart_cma.restart_index))
    assert abs(ss_share - cma_share) <= largest


def test_caps_are_respected(bisphere: BiObjectiveProblem) -> None:
    schedule = HybridSchedule(
        ss_only_until_factor=50, ipop_from_factor=150, share_factor=300
    )
    h = Hybrid(bisphere, 5000, seed=3, schedule=schedule).run()
    cap = schedule.cap(2, 5000)
    assert all(h.ledgers[c] <= cap for c in (SS, RESTART_CMA, IPOP))
    assert sum(h.ledgers.values()) == h.total_evals <= 5000


@pytest.mark.slow
def test_ledger_conservation_on_random_configurations() -> None:
    rng = np.random.default_rng(10)
    for trial in range(50):
        k = int(rng.integers(1, 56))
        n = int(rng.integers(2, 4))
        budget = int(rng.integers(n + 2, 400 * n))
        schedule = HybridSchedule(
            ss_only_until_factor=int(rng.integers(10, 60)),
            ipop_from_factor=int(rng.integers(60, 200)),
            share_factor=int(rng.integers(50, 400)),
        )
        p = make_problem(k, n, int(rng.integers(1, 6)))
        h = Hybrid(p, budget, seed=trial, schedule=schedule).run()
        assert sum(h.ledgers.values()) == h.total_evals <= budget
        cap = schedule.cap(n, budget)
        assert all(h.ledgers[c] <= cap for c in (SS, RESTART_CMA, IPOP))
        hvs = [hv for _, hv in h.evaluator.trace]
        assert all(a < b for a, b in zip(hvs, hvs[1:]))


def test_identical_runs_are_identical(bisphere: BiObjectiveProblem) -> None:
    a = hybrid_run(bisphere, 1500, seed=4, schedule=QUICK)
    b = hybrid_run(bisphere, 1500, seed=4, schedule=QUICK)
    assert dumps_record(a) == dumps_record(b)
    c = hybrid_run(bisphere, 1500, seed=5, schedule=QUICK)
    assert dumps_record(a) != dumps_record(c)


def test_hybrid_record(bisphere: BiObjectiveProblem) -> None:
    record = hybrid_run(bisphere, 500, seed=0)
    ref = reference_data(bisphere)
    assert record.algo == "hybrid"
    assert record.ref_hv == ref.ref_hv and record.ref_source == "analytic"
    assert record.total_evals == 500
    assert record.ledgers[WARMSTART] == 20
    trace = anytime_trace(record)
    assert trace[0] == (0, ref.ref_hv)
    diffs = [d for _, d in trace]
    assert all(a >= b for a, b in zip(diffs, diffs[1:]))


def test_anytime_trace_needs_reference(bisphere: BiObjectiveProblem) -> None:
    record = hybrid_run(bisphere, 100, seed=0).model_copy(update={"ref_hv": None})
    with pytest.raises(ValueError):
        anytime_trace(record)


@pytest.mark.parametrize("algo", ["warmstart", "ss-mocma", "ipop-mocma", "restart-cma"])
def test_component_runs(bisphere: BiObjectiveProblem, algo: str) -> None:
    record, archive = component_run(bisphere, algo, 1000, seed=0)
    assert record.algo == algo
    assert record.total_evals <= 1000
    assert sum(record.ledgers.values()) == record.total_evals
    assert len(record.ledgers) == 1
    assert record.final_hv == pytest.approx(archive.hv)


def test_component_run_validation(bisphere: BiObjectiveProblem) -> None:
    with pytest.raises(ValueError):
        component_run(bisphere, "ss-mocma", 5, seed=0)
    with pytest.raises(ValueError):
        component_run(bisphere, "nsga2", 1000, seed=0)


@pytest.mark.slow
def test_bisphere_end_to_end() -> None:
    p = make_problem(1, 5, 1)
    ref_hv = reference_data(p).ref_hv
    warm_only = hv2d([s.value for s in run_warmstart(p, 50)], p.ref_point)
    finals = []
    for seed in range(10):
        record = hybrid_run(p, 5000, seed)
        diffs = [d for _, d in anytime_trace(record)]
        assert all(a >= b for a, b in zip(diffs, diffs[1:]))
        assert record.final_hv > warm_only
        finals.append(diffs[-1])
    assert np.median(finals) <= 1e-2 * ref_hv


@pytest.mark.slow
def test_injections_reach_the_steady_state(
    bisphere: BiObjectiveProblem, monkeypatch: pytest.MonkeyPatch
) -> None:
    schedule = HybridSchedule(ss_only_until_factor=100, ipop_from_factor=2000)
    finished: List[Solution] = []
    steps: List[Tuple[Phase, Optional[Solution]]] = []

    def counting_ss_step(st, evaluator, injected=None):
        steps.append((phase_of(evaluator.count, 2, schedule), injected))
        return ss_step(st, evaluator, injected)

    def counting_restart_step(st, evaluator, evals):
        used, best = restart_cma_step(st, evaluator, evals)
        if best is not None:
            finished.append(best)
        return used, best

    monkeypatch.setattr(hybrid, "ss_step", counting_ss_step)
    monkeypatch.setattr(hybrid, "restart_cma_step", counting_restart_step)
    Hybrid(bisphere, 20000, seed=6, schedule=schedule).run()

    injected = [s for _, s in steps if s is not None]
    from_cma = [s for s in injected if any(s is f for f in finished)]
    assert finished
    # each finished run's best enters the next steady-state iteration, in order
    assert from_cma == finished[: len(from_cma)]
    assert len(from_cma) >= len(finished) - 1

    from_ipop = [
        (phase, s)
        for phase, s in steps
        if s is not None and not any(s is f for f in finished)
    ]
    assert from_ipop
    assert all(phase is Phase.P4 for phase, _ in from_ipop)
    p4_steps = sum(1 for phase, _ in steps if phase is Phase.P4)
    assert 0.05 < len(from_ipop) / p4_steps < 0.15
