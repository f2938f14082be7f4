import math
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from hmocma.core import ObjectiveVector, ParetoArchive, hv2d
from hmocma.problems import (
    FUNCTION_ORDER,
    BudgetExceededError,
    Category,
    Evaluator,
    FunctionId,
    NoReferenceError,
    bisphere_reference,
    evaluate,
    index_of,
    make_base_function,
    make_problem,
    pair_of,
    problem_group,
    reference_data,
    reference_path,
)


def test_pair_indexing_round_trips() -> None:
    assert pair_of(1) == (0, 0)
    assert pair_of(2) == (0, 1)
    assert pair_of(11) == (1, 1)
    assert pair_of(55) == (9, 9)
    for k in range(1, 56):
        i, j = pair_of(k)
        assert i <= j
        assert index_of(i, j) == k
        assert index_of(j, i) == k
    with pytest.raises(ValueError):
        pair_of(0)


def test_problem_groups() -> None:
    assert problem_group(1) == "separable-separable"
    assert problem_group(55) == "weakstructure-weakstructure"
    assert len({problem_group(k) for k in range(1, 56)}) == 15


def test_ten_functions_five_categories() -> None:
    assert len(FUNCTION_ORDER) == 10
    categories = {make_base_function(f, 3).category for f in FUNCTION_ORDER}
    assert categories == set(Category)


@pytest.mark.parametrize("fid", list(FunctionId))
def test_base_functions_vanish_at_origin(
    fid: FunctionId, rng: np.random.Generator
) -> None:
    for n in (2, 5):
        f = make_base_function(fid, n)
        assert f(np.zeros(n)) == pytest.approx(0.0, abs=1e-12)
        assert f(rng.uniform(1.0, 3.0, n)) > 0.0


def test_make_problem_is_deterministic() -> None:
    a, b = make_problem(17, 3, 2), make_problem(17, 3, 2)
    assert np.array_equal(a.shift1, b.shift1)
    assert np.array_equal(a.rot2, b.rot2)
    assert a.ref_point == b.ref_point
    c = make_problem(17, 3, 3)
    assert not np.array_equal(a.shift1, c.shift1)


def test_problem_instance_data(rng: np.random.Generator) -> None:
    p = make_problem(23, 4, 1)
    assert np.all(np.abs(p.shift1) <= 4.0) and np.all(np.abs(p.shift2) <= 4.0)
    for rot in (p.rot1, p.rot2):
        assert np.allclose(rot @ rot.T, np.eye(4), atol=1e-12)
    assert evaluate(p, p.shift1).f1 == pytest.approx(0.0, abs=1e-12)
    assert evaluate(p, p.shift2).f2 == pytest.approx(0.0, abs=1e-12)
    origin = evaluate(p, np.zeros(4))
    assert p.ref_point == pytest.approx((1.1 * origin.f1, 1.1 * origin.f2))
    assert p.key.stem() == "k23_n4_i1"


def test_separable_functions_are_not_rotated() -> None:
    p = make_problem(2, 3, 1)
    assert np.array_equal(p.rot1, np.eye(3))
    assert np.array_equal(p.rot2, np.eye(3))


def test_evaluate_checks_shape(bisphere) -> None:
    with pytest.raises(ValueError):
        evaluate(bisphere, np.zeros(3))


def test_bisphere_reference_matches_quadrature() -> None:
    for d, ref in ((2.0, (5.0, 4.5)), (3.0, (2.0, 20.0)), (1.5, (4.0, 1.0))):
        r1, r2 = ref

        def gap(u: float) -> float:
            front = (d - math.sqrt(u)) ** 2 if u <= d * d else 0.0
            return max(0.0, r2 - front)

        kinks = [u for u in (d * d, max(0.0, d - math.sqrt(r2)) ** 2) if 0.0 < u < r1]
        expected, _ = integrate.quad(gap, 0.0, r1, points=kinks or None, limit=200)
        got = bisphere_reference(d, ObjectiveVector(r1, r2))
        assert got == pytest.approx(expected, rel=1e-8)


def test_bisphere_reference_bounds_sampled_fronts(bisphere) -> None:
    t = np.linspace(0.0, 1.0, 20001)
    points = bisphere.shift1 + t[:, None] * (bisphere.shift2 - bisphere.shift1)
    front = [evaluate(bisphere, x) for x in points]
    ref = reference_data(bisphere)
    assert ref.source == "analytic"
    sampled = hv2d(front, bisphere.ref_point)
    assert sampled <= ref.ref_hv
    assert sampled == pytest.approx(ref.ref_hv, rel=1e-3)


def test_reference_data_from_file(tmp_path: Path) -> None:
    p = make_problem(2, 2, 1)
    with pytest.raises(NoReferenceError):
        reference_data(p, tmp_path)
    r1, r2 = p.ref_point
    path = reference_path(p.key, tmp_path)
    path.write_text(f"ref_point {r1!r} {r2!r}\n0.0 {r2 / 2!r} 3\n{r1 / 2!r} 0.0 8\n")
    ref = reference_data(p, tmp_path)
    assert ref.source == "long_run"
    assert ref.ref_hv == pytest.approx(r1 * r2 / 2 + r1 * r2 / 4)


def test_reference_file_needs_header(tmp_path: Path) -> None:
    p = make_problem(2, 2, 1)
    reference_path(p.key, tmp_path).write_text("0.0 1.0 1\n")
    with pytest.raises(ValueError):
        reference_data(p, tmp_path)


def test_evaluator_counts_and_charges(bisphere) -> None:
    archive = ParetoArchive(bisphere.ref_point)
    ev = Evaluator(bisphere, archive, budget=5)
    first = ev(np.zeros(2))
    assert first.eval_index == 1
    with ev.charging("ss"):
        ev(bisphere.shift1)
        with ev.charging("ipop"):
            ev(bisphere.shift2)
        ev(np.ones(2))
    ev(-np.ones(2))
    assert ev.count == 5
    assert ev.ledgers == {"default": 2, "ss": 2, "ipop": 1}
    assert sum(ev.ledgers.values()) == ev.count
    assert ev.remaining == 0
    with pytest.raises(BudgetExceededError):
        ev(np.zeros(2))
    assert ev.count == 5


def test_evaluator_trace_tracks_archive(bisphere, rng: np.random.Generator) -> None:
    archive = ParetoArchive(bisphere.ref_point)
    ev = Evaluator(bisphere, archive)
    for _ in range(200):
        ev(rng.uniform(-5.0, 5.0, 2))
    hvs = [hv for _, hv in ev.trace]
    evals = [e for e, _ in ev.trace]
    assert all(a < b for a, b in zip(hvs, hvs[1:]))
    assert all(a < b for a, b in zip(evals, evals[1:]))
    assert hvs[-1] == archive.hv
    assert archive.hv == pytest.approx(hv2d(archive.front(), bisphere.ref_point))
