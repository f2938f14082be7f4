"""Bi-objective primitives: dominance, non-dominated sorting, exact 2-D
hypervolume and the all-time Pareto archive.

Minimization throughout. Objective vectors are plain ``(f1, f2)`` named
tuples so they sort, hash and compare like tuples.
"""

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

SearchPoint = NDArray[np.float64]


class NonFiniteObjectiveError(ValueError):
    """An evaluation produced NaN or an infinite objective value."""


class ObjectiveVector(NamedTuple):
    f1: float
    f2: float

    @classmethod
    def checked(cls, f1: float, f2: float) -> "ObjectiveVector":
        if not (math.isfinite(f1) and math.isfinite(f2)):
            raise NonFiniteObjectiveError(f"non-finite objective value ({f1}, {f2})")
        return cls(float(f1), float(f2))


@dataclass(frozen=True)
class Solution:
    point: SearchPoint = field(repr=False)
    value: ObjectiveVector
    eval_index: int

    def __post_init__(self) -> None:
        if self.eval_index < 1:
            raise ValueError(f"eval_index must be positive, got {self.eval_index}")


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])


def _as_array(values: Sequence[ObjectiveVector]) -> NDArray[np.float64]:
    return np.asarray(values, dtype=float).reshape(-1, 2)


def nondominated_sort(pop: Sequence[ObjectiveVector]) -> List[int]:
    """Front index per member: 0 for the non-dominated set, r+1 for the set
    that becomes non-dominated once ranks <= r are removed."""
    if len(pop) == 0:
        raise ValueError("nondominated_sort needs a nonempty population")
    f = _as_array(pop)
    le = (f[:, None, :] <= f[None, :, :]).all(axis=2)
    lt = (f[:, None, :] < f[None, :, :]).any(axis=2)
    # dom[i, j]: i dominates j
    dom = le & lt
    dominated_by = dom.sum(axis=0)
    ranks = np.full(len(f), -1, dtype=int)
    current = np.flatnonzero(dominated_by == 0)
    rank = 0
    while current.size:
        ranks[current] = rank
        dominated_by = dominated_by - dom[current].sum(axis=0)
        dominated_by[ranks >= 0] = -1
        current = np.flatnonzero(dominated_by == 0)
        rank += 1
    return ranks.tolist()


def _staircase(
    front: Iterable[ObjectiveVector], ref: ObjectiveVector
) -> List[ObjectiveVector]:
    """Points strictly inside the reference box, non-dominated, by ascending f1."""
    inside = sorted(p for p in front if p[0] < ref[0] and p[1] < ref[1])
    stairs: List[ObjectiveVector] = []
    for p in inside:
        if not stairs or p[1] < stairs[-1][1]:
            stairs.append(ObjectiveVector(p[0], p[1]))
    return stairs


def hv2d(front: Iterable[ObjectiveVector], ref: ObjectiveVector) -> float:
    hv = 0.0
    upper = ref[1]
    for f1, f2 in _staircase(front, ref):
        hv += (ref[0] - f1) * (upper - f2)
        upper = f2
    return hv


def hv_contribution(
    i: int, front: Sequence[ObjectiveVector], ref: ObjectiveVector
) -> float:
    """Exclusive hypervolume of ``front[i]``; ``front`` must be sorted by
    ascending f1 and mutually non-dominated."""
    if not 0 <= i < len(front):
        raise IndexError(f"index {i} out of range for front of size {len(front)}")
    right = front[i + 1][0] if i + 1 < len(front) else ref[0]
    upper = front[i - 1][1] if i > 0 else ref[1]
    return _exclusive_area(front[i], right, upper, ref)


def _exclusive_area(
    p: ObjectiveVector, right_f1: float, upper_f2: float, ref: ObjectiveVector
) -> float:
    if p[0] >= ref[0] or p[1] >= ref[1]:
        return 0.0
    return (min(right_f1, ref[0]) - p[0]) * (min(upper_f2, ref[1]) - p[1])


SelectionKey = Tuple[int, float]


def _selection_keys(
    front: Sequence[ObjectiveVector], ref: ObjectiveVector
) -> List[SelectionKey]:
    """Per-member selection key within one front, larger is better.

    In-region members are keyed by their hv contribution; members outside the
    reference box come after all of them, ordered by distance to the box.
    """
    order = sorted(range(len(front)), key=lambda j: (front[j][0], front[j][1]))
    ordered = [front[j] for j in order]
    keys: List[SelectionKey] = [(0, 0.0)] * len(front)
    for pos, j in enumerate(order):
        f1, f2 = ordered[pos]
        if f1 < ref[0] and f2 < ref[1]:
            keys[j] = (1, hv_contribution(pos, ordered, ref))
        else:
            keys[j] = (0, -(max(0.0, f1 - ref[0]) + max(0.0, f2 - ref[1])))
    return keys


def hv_rank_order(
    values: Sequence[ObjectiveVector], ref: ObjectiveVector
) -> List[int]:
    """Indices best first: by front rank, then by descending selection key.
    Ties keep the original order."""
    ranks = nondominated_sort(values)
    keys: List[SelectionKey] = [(0, 0.0)] * len(values)
    for r in set(ranks):
        members = [j for j, rk in enumerate(ranks) if rk == r]
        for j, k in zip(members, _selection_keys([values[j] for j in members], ref)):
            keys[j] = k
    return sorted(
        range(len(values)), key=lambda j: (ranks[j], -keys[j][0], -keys[j][1])
    )


def hv_select(
    values: Sequence[ObjectiveVector], mu: int, ref: ObjectiveVector
) -> List[int]:
    """Indices of the ``mu`` survivors, in ascending index order.

    Whole fronts are kept while they fit; the front that overflows is thinned
    one member at a time, always dropping the smallest contributor and
    recomputing contributions after each removal.
    """
    if mu >= len(values):
        return list(range(len(values)))
    ranks = nondominated_sort(values)
    kept: List[int] = []
    for r in range(max(ranks) + 1):
        members = [j for j, rk in enumerate(ranks) if rk == r]
        if len(kept) + len(members) <= mu:
            kept.extend(members)
            continue
        while len(kept) + len(members) > mu:
            keys = _selection_keys([values[j] for j in members], ref)
            worst = min(range(len(members)), key=lambda p: (keys[p], -members[p]))
            members.pop(worst)
        kept.extend(members)
        break
    return sorted(kept)


class ParetoArchive:
    """All-time non-dominated set with incrementally maintained hypervolume.

    Members are kept by ascending f1 (hence strictly descending f2). Exact
    duplicates of an incumbent's objective vector are rejected.
    """

    def __init__(self, ref_point: ObjectiveVector):
        self.ref_point = ObjectiveVector(float(ref_point[0]), float(ref_point[1]))
        self.members: List[Solution] = []
        self._f1: List[float] = []
        self.hv = 0.0

    def __len__(self) -> int:
        return len(self.members)

    def front(self) -> List[ObjectiveVector]:
        return [m.value for m in self.members]

    def insert(self, s: Solution) -> bool:
        f1, f2 = s.value
        left = bisect.bisect_right(self._f1, f1) - 1
        if left >= 0 and self.members[left].value[1] <= f2:
            return False
        lo = bisect.bisect_left(self._f1, f1)
        hi = lo
        while hi < len(self.members) and self.members[hi].value[1] >= f2:
            hi += 1
        right = self._f1[hi] if hi < len(self.members) else self.ref_point[0]
        upper = self.members[lo - 1].value[1] if lo > 0 else self.ref_point[1]
        if hi > lo:
            # dominated members give back their joint exclusive area
            local = ObjectiveVector(
                min(right, self.ref_point[0]), min(upper, self.ref_point[1])
            )
            self.hv -= hv2d([m.value for m in self.members[lo:hi]], local)
        del self.members[lo:hi]
        del self._f1[lo:hi]
        self.members.insert(lo, s)
        self._f1.insert(lo, f1)
        self.hv += _exclusive_area(s.value, right, upper, self.ref_point)
        return True

    def to_lines(self) -> List[str]:
        return [f"{m.value[0]!r} {m.value[1]!r} {m.eval_index}" for m in self.members]

    @classmethod
    def from_lines(
        cls, lines: Iterable[str], ref_point: ObjectiveVector, n: Optional[int] = None
    ) -> "ParetoArchive":
        """Rebuild an archive from ``f1 f2 eval_index`` lines. Search points are
        not part of the format; members get an empty point (or NaNs of
        dimension ``n``)."""
        archive = cls(ref_point)
        empty = np.full(n, np.nan) if n else np.empty(0)
        for number, line in enumerate(lines, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 3:
                raise ValueError(f"line {number}: expected 'f1 f2 eval_index'")
            value = ObjectiveVector.checked(float(parts[0]), float(parts[1]))
            archive.insert(Solution(empty, value, int(parts[2])))
        return archive
