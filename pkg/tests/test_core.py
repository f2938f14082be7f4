import math
from typing import List, Sequence

import numpy as np
import pytest
from conftest import random_front, solution

from hmocma.core import (
    NonFiniteObjectiveError,
    ObjectiveVector,
    ParetoArchive,
    Solution,
    dominates,
    hv2d,
    hv_contribution,
    hv_rank_order,
    hv_select,
    nondominated_sort,
)

REF = ObjectiveVector(1.0, 1.0)


def peeling_ranks(pop: Sequence[ObjectiveVector]) -> List[int]:
    dom = [[dominates(a, b) for b in pop] for a in pop]
    ranks = [-1] * len(pop)
    left = set(range(len(pop)))
    rank = 0
    while left:
        front = {i for i in left if not any(dom[j][i] for j in left)}
        for i in front:
            ranks[i] = rank
        left -= front
        rank += 1
    return ranks


def grid_hv(front: Sequence[ObjectiveVector], ref: ObjectiveVector) -> float:
    """Exact area by summing the cells of the coordinate-compressed grid."""
    inside = [p for p in front if p[0] < ref[0] and p[1] < ref[1]]
    pts = np.array(inside, dtype=float).reshape(-1, 2)
    xs = np.unique(np.append(pts[:, 0], ref[0]))
    ys = np.unique(np.append(pts[:, 1], ref[1]))
    covered = (
        (pts[:, 0, None, None] <= xs[None, :-1, None])
        & (pts[:, 1, None, None] <= ys[None, None, :-1])
    ).any(axis=0)
    cells = np.outer(np.diff(xs), np.diff(ys))
    return float(np.sum(cells * covered))


def test_dominates() -> None:
    assert dominates(ObjectiveVector(1, 2), ObjectiveVector(2, 3))
    assert not dominates(ObjectiveVector(1, 2), ObjectiveVector(1, 2))
    assert not dominates(ObjectiveVector(1, 3), ObjectiveVector(3, 1))
    assert dominates(ObjectiveVector(1, 2), ObjectiveVector(1, 3))


def test_nondominated_sort_examples() -> None:
    assert nondominated_sort([ObjectiveVector(1, 1)]) == [0]
    pop = [
        ObjectiveVector(0, 2),
        ObjectiveVector(2, 0),
        ObjectiveVector(1, 1),
        ObjectiveVector(2, 2),
    ]
    assert nondominated_sort(pop) == [0, 0, 0, 1]
    with pytest.raises(ValueError):
        nondominated_sort([])


def test_nondominated_sort_matches_peeling(rng: np.random.Generator) -> None:
    for _ in range(1000):
        size = int(rng.integers(1, 65))
        # small integer grid so ties and duplicates are frequent
        raw = rng.integers(0, 8, (size, 2))
        pop = [ObjectiveVector(float(a), float(b)) for a, b in raw]
        assert nondominated_sort(pop) == peeling_ranks(pop)


def test_hv2d_examples() -> None:
    assert hv2d([ObjectiveVector(0, 0)], REF) == 1.0
    front = [ObjectiveVector(0.25, 0.75), ObjectiveVector(0.75, 0.25)]
    assert hv2d(front, REF) == pytest.approx(0.3125, abs=1e-15)
    assert hv2d([], REF) == 0.0
    assert hv2d([ObjectiveVector(1.5, 0.0)], REF) == 0.0


def test_hv2d_matches_grid_oracle(rng: np.random.Generator) -> None:
    for _ in range(200):
        size = int(rng.integers(1, 51))
        raw = rng.uniform(0.0, 1.2, (size, 2))
        pop = [ObjectiveVector(float(a), float(b)) for a, b in raw]
        expected = grid_hv(pop, REF)
        assert hv2d(pop, REF) == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_hv2d_is_order_free_and_monotone(rng: np.random.Generator) -> None:
    pop = [ObjectiveVector(*map(float, p)) for p in rng.uniform(0, 1, (30, 2))]
    hv = hv2d(pop, REF)
    shuffled = [pop[i] for i in rng.permutation(len(pop))]
    assert hv2d(shuffled, REF) == pytest.approx(hv, rel=1e-14)
    assert hv2d(pop + pop[:10], REF) == pytest.approx(hv, rel=1e-14)
    assert hv2d(pop[:-1], REF) <= hv + 1e-15
    assert hv2d(pop + [ObjectiveVector(0.5, 0.5)], REF) >= hv - 1e-15


@pytest.mark.slow
def test_hv2d_matches_monte_carlo(rng: np.random.Generator) -> None:
    samples, chunk = 10**7, 2 * 10**5
    for _ in range(5):
        pop = np.array(random_front(rng, 50))
        pts = [ObjectiveVector(*p) for p in pop]
        hits = 0
        for _ in range(samples // chunk):
            u = rng.uniform(0.0, 1.0, (chunk, 2))
            dominated = (
                (pop[None, :, 0] <= u[:, None, 0]) & (pop[None, :, 1] <= u[:, None, 1])
            ).any(axis=1)
            hits += int(dominated.sum())
        p = hits / samples
        stderr = math.sqrt(p * (1.0 - p) / samples)
        assert abs(hv2d(pts, REF) - p) <= 4.5 * stderr


def test_hv_contribution_examples() -> None:
    assert hv_contribution(0, [ObjectiveVector(0, 0)], REF) == 1.0
    front = [ObjectiveVector(0.25, 0.75), ObjectiveVector(0.75, 0.25)]
    assert hv_contribution(0, front, REF) == pytest.approx(0.125, abs=1e-15)
    with pytest.raises(IndexError):
        hv_contribution(2, front, REF)
    with pytest.raises(IndexError):
        hv_contribution(-1, front, REF)


def test_hv_contribution_is_leave_one_out(rng: np.random.Generator) -> None:
    for _ in range(100):
        front = random_front(rng, int(rng.integers(1, 40)))
        total = hv2d(front, REF)
        contributions = []
        for i in range(len(front)):
            rest = front[:i] + front[i + 1 :]
            expected = total - hv2d(rest, REF)
            got = hv_contribution(i, front, REF)
            # the leave-one-out difference cancels, hence the absolute floor
            assert got == pytest.approx(expected, rel=1e-12, abs=1e-13)
            contributions.append(got)
        assert sum(contributions) <= total + 1e-15


def test_hv_select_drops_least_contributor() -> None:
    ref = ObjectiveVector(4.0, 4.0)
    values = [
        ObjectiveVector(0.0, 3.0),
        ObjectiveVector(1.0, 1.0),
        ObjectiveVector(1.05, 0.95),
        ObjectiveVector(3.0, 0.0),
        ObjectiveVector(2.0, 2.0),
    ]
    assert hv_select(values, 5, ref) == [0, 1, 2, 3, 4]
    assert hv_select(values, 4, ref) == [0, 1, 2, 3]
    assert hv_select(values, 3, ref) == [0, 1, 3]


def test_hv_rank_order_puts_outside_points_last_in_their_front() -> None:
    ref = ObjectiveVector(1.0, 1.0)
    values = [
        ObjectiveVector(2.0, -1.0),
        ObjectiveVector(0.5, 0.5),
        ObjectiveVector(0.9, 0.9),
        ObjectiveVector(-0.5, 3.0),
    ]
    order = hv_rank_order(values, ref)
    assert order[0] == 1
    assert order[-1] == 2
    # the point nearer the box comes first among the outsiders
    assert order.index(0) < order.index(3)


def test_objective_vector_rejects_nan() -> None:
    with pytest.raises(NonFiniteObjectiveError):
        ObjectiveVector.checked(math.nan, 1.0)
    with pytest.raises(NonFiniteObjectiveError):
        ObjectiveVector.checked(1.0, math.inf)


def test_solution_needs_positive_eval_index() -> None:
    with pytest.raises(ValueError):
        Solution(np.zeros(2), ObjectiveVector(0.0, 0.0), 0)


def test_archive_insert_basics() -> None:
    archive = ParetoArchive(REF)
    assert archive.insert(solution(0.0, 0.0))
    assert archive.hv == 1.0
    assert not archive.insert(solution(1.0, 1.0, 2))
    assert len(archive) == 1


def test_archive_keeps_incumbent_on_duplicate() -> None:
    archive = ParetoArchive(REF)
    archive.insert(solution(0.3, 0.4, 1))
    assert not archive.insert(solution(0.3, 0.4, 2))
    assert [m.eval_index for m in archive.members] == [1]


def test_archive_keeps_points_outside_reference_box() -> None:
    archive = ParetoArchive(REF)
    assert archive.insert(solution(-1.0, 2.0))
    assert archive.hv == 0.0
    assert archive.insert(solution(0.5, 0.5, 2))
    assert len(archive) == 2
    assert archive.hv == pytest.approx(0.25)


def test_archive_matches_batch_recompute(rng: np.random.Generator) -> None:
    archive = ParetoArchive(REF)
    inserted: List[ObjectiveVector] = []
    last_hv = 0.0
    for t in range(1000):
        v = ObjectiveVector(*map(float, rng.uniform(0.0, 1.1, 2)))
        archive.insert(Solution(np.zeros(2), v, t + 1))
        inserted.append(v)
        assert archive.hv >= last_hv - 1e-15
        last_hv = archive.hv

    ranks = nondominated_sort(inserted)
    expected = sorted({v for v, r in zip(inserted, ranks) if r == 0})
    assert archive.front() == expected
    f1 = [v.f1 for v in archive.front()]
    f2 = [v.f2 for v in archive.front()]
    assert f1 == sorted(f1) and len(set(f1)) == len(f1)
    assert all(a > b for a, b in zip(f2, f2[1:]))
    assert archive.hv == pytest.approx(hv2d(inserted, REF), rel=1e-12)


def test_archive_hv_after_dominating_insert() -> None:
    archive = ParetoArchive(REF)
    archive.insert(solution(0.2, 0.8, 1))
    archive.insert(solution(0.5, 0.5, 2))
    archive.insert(solution(0.8, 0.2, 3))
    archive.insert(solution(0.4, 0.4, 4))
    assert [m.eval_index for m in archive.members] == [1, 4, 3]
    assert archive.hv == pytest.approx(hv2d(archive.front(), REF), rel=1e-14)


def test_archive_text_lines() -> None:
    archive = ParetoArchive(REF)
    archive.insert(solution(0.1, 0.7, 3))
    archive.insert(solution(0.6, 0.2, 9))
    lines = archive.to_lines()
    assert lines == ["0.1 0.7 3", "0.6 0.2 9"]
    restored = ParetoArchive.from_lines(lines + [""], REF, n=2)
    assert restored.front() == archive.front()
    assert restored.hv == archive.hv
    assert np.isnan(restored.members[0].point).all()
    with pytest.raises(ValueError):
        ParetoArchive.from_lines(["0.1 0.2"], REF)
