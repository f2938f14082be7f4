"""Scoring of anytime runs against hypervolume-difference targets.

A run's trace is turned into first-hit evaluation counts for 58 targets
``factor * ref_hv``; runtimes of unreached targets are simulated by chaining
uniformly re-drawn runs of the same problem until one succeeds, and the
resulting runtimes feed ECDF curves and average-runtime tables. Records are
stored as JSON lines: a header, one object per trace entry and a footer.
"""

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from pydantic import ValidationError

from .logging_config import get_logger
from .models import RecordFooter, RecordHeader, RunRecord, TraceEntry
from .problems import problem_group
from .utils import make_rng

logger = get_logger(__name__)

NEGATIVE_FACTORS: Tuple[float, ...] = tuple(
    -(10.0 ** e) for e in (-4.0, -4.2, -4.4, -4.6, -4.8, -5.0)
)
POSITIVE_FACTORS: Tuple[float, ...] = tuple(
    10.0 ** round(-5.0 + 0.1 * j, 1) for j in range(51)
)
TARGET_FACTORS: Tuple[float, ...] = NEGATIVE_FACTORS + (0.0,) + POSITIVE_FACTORS
NUM_TARGETS = len(TARGET_FACTORS)

BOOTSTRAP_SAMPLES = 1000
BUDGET_GRID: NDArray[np.float64] = np.logspace(0, 6, 61)


class RecordParseError(ValueError):
    """A record file is malformed or truncated."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class TargetSet:
    ref_hv: float
    factors: Tuple[float, ...] = TARGET_FACTORS

    @property
    def targets(self) -> NDArray[np.float64]:
        return np.asarray(self.factors) * self.ref_hv


def make_targets(ref_hv: float) -> TargetSet:
    if not ref_hv > 0:
        raise ValueError(f"ref_hv must be positive, got {ref_hv}")
    return TargetSet(ref_hv)


def _require_ref(rec: RunRecord) -> float:
    if rec.ref_hv is None:
        raise ValueError(f"record {rec.problem.stem()} has no reference hypervolume")
    return rec.ref_hv


def targets_hit(rec: RunRecord) -> List[Optional[int]]:
    """First evaluation index at which each target is reached, or None."""
    targets = make_targets(_require_ref(rec)).targets
    hits: List[Optional[int]] = [None] * NUM_TARGETS
    if not rec.trace:
        return hits
    evals = np.array([e for e, _ in rec.trace])
    diffs = rec.ref_hv - np.array([hv for _, hv in rec.trace])
    for t, threshold in enumerate(targets):
        reached = np.flatnonzero(diffs <= threshold)
        if reached.size:
            hits[t] = int(evals[reached[0]])
    return hits


def fraction_reached(rec: RunRecord, at_evals: int) -> float:
    if at_evals < 0:
        raise ValueError(f"at_evals must be non-negative, got {at_evals}")
    hits = targets_hit(rec)
    return sum(1 for h in hits if h is not None and h <= at_evals) / NUM_TARGETS


def _runtime_matrix(
    records: Sequence[RunRecord],
) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Hit times (runs x targets, inf when unreached) and run lengths."""
    hits = np.array(
        [[math.inf if h is None else h for h in targets_hit(r)] for r in records],
        dtype=float,
    )
    return hits, np.array([r.total_evals for r in records], dtype=float)


def simulated_runtimes(
    records: Sequence[RunRecord],
    rng: np.random.Generator,
    samples: int = BOOTSTRAP_SAMPLES,
) -> NDArray[np.float64]:
    """Bootstrapped runtimes, shape (targets, samples), for runs of one problem.

    Each sample restarts uniformly drawn runs until one reaches the target:
    the unsuccessful draws contribute their full length, the successful one
    its hit time. Targets no run reaches get ``inf``.
    """
    hits, lengths = _runtime_matrix(records)
    out = np.full((NUM_TARGETS, samples), math.inf)
    for t in range(NUM_TARGETS):
        success = np.isfinite(hits[:, t])
        if not success.any():
            continue
        p_success = success.mean()
        final = rng.choice(hits[success, t], size=samples)
        if p_success == 1.0:
            out[t] = final
            continue
        failures = rng.geometric(p_success, size=samples) - 1
        draws = rng.choice(lengths[~success], size=int(failures.sum()))
        wasted = np.zeros(samples)
        np.add.at(wasted, np.repeat(np.arange(samples), failures), draws)
        out[t] = wasted + final
    return out


def _dimension(records: Sequence[RunRecord]) -> int:
    dims = {r.problem.n for r in records}
    if len(dims) > 1:
        raise ValueError(f"records mix dimensions {sorted(dims)}")
    return dims.pop()


def _scored(records: Iterable[RunRecord]) -> List[RunRecord]:
    scored = []
    for r in records:
        if r.ref_hv is None:
            logger.warning(
                "Skipping record without reference", problem=r.problem.stem()
            )
            continue
        scored.append(r)
    return scored


def ecdf(
    records: Sequence[RunRecord],
    budgets: NDArray[np.float64] = BUDGET_GRID,
    bootstrap_seed: int = 0,
    samples: int = BOOTSTRAP_SAMPLES,
) -> NDArray[np.float64]:
    """Proportion of (problem, target, sample) runtimes within ``b * n``
    evaluations, for every ``b`` in ``budgets``."""
    records = _scored(records)
    if not records:
        return np.zeros(len(budgets))
    n = _dimension(records)
    by_problem: Dict[int, List[RunRecord]] = defaultdict(list)
    for r in records:
        by_problem[r.problem.k].append(r)

    runtimes = []
    for k, group in sorted(by_problem.items()):
        rng = make_rng(bootstrap_seed, k, n)
        runtimes.append(simulated_runtimes(group, rng, samples).ravel())
    pooled = np.sort(np.concatenate(runtimes))
    counts = np.searchsorted(pooled, np.asarray(budgets) * n, side="right")
    return np.asarray(counts / len(pooled))


def aggregate_ecdf(
    records: Sequence[RunRecord],
    label: Callable[[RunRecord], str],
    budgets: NDArray[np.float64] = BUDGET_GRID,
    bootstrap_seed: int = 0,
) -> Dict[str, NDArray[np.float64]]:
    """One ECDF curve per label, e.g. per function or per category pair."""
    groups: Dict[str, List[RunRecord]] = defaultdict(list)
    for r in records:
        groups[label(r)].append(r)
    return {
        name: ecdf(group, budgets, bootstrap_seed)
        for name, group in sorted(groups.items())
    }


def group_label(r: RunRecord) -> str:
    return problem_group(r.problem.k)


def function_label(r: RunRecord) -> str:
    return f"f{r.problem.k}"


def art(records: Sequence[RunRecord], factor: float) -> float:
    """Average runtime for the target ``factor * ref_hv``: hit times of the
    successful runs plus full lengths of the others, over the successes."""
    if not records:
        raise ValueError("art needs at least one record")
    t = TARGET_FACTORS.index(factor)
    spent, successes = 0.0, 0
    for r in records:
        hit = targets_hit(r)[t]
        if hit is None:
            spent += r.total_evals
        else:
            spent += hit
            successes += 1
    return spent / successes if successes else math.inf


def art_table(records: Sequence[RunRecord]) -> pd.DataFrame:
    """aRT per problem (k, n) and target factor, one row per pair."""
    groups: Dict[Tuple[int, int], List[RunRecord]] = defaultdict(list)
    for r in _scored(records):
        groups[(r.problem.k, r.problem.n)].append(r)
    rows = []
    for (k, n), group in sorted(groups.items()):
        for factor in TARGET_FACTORS:
            rows.append(
                {
                    "k": k,
                    "n": n,
                    "group": problem_group(k),
                    "factor": factor,
                    "runs": len(group),
                    "art": art(group, factor),
                }
            )
    return pd.DataFrame(rows, columns=["k", "n", "group", "factor", "runs", "art"])


def write_art_csv(path: Path, records: Sequence[RunRecord]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    art_table(records).to_csv(path, index=False)


def write_ecdf_tsv(
    path: Path,
    curve: NDArray[np.float64],
    budgets: NDArray[np.float64] = BUDGET_GRID,
) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"evals_per_dim": budgets, "proportion": curve})
    frame.to_csv(path, sep="\t", index=False, float_format="%.10g")


def dumps_record(record: RunRecord) -> str:
    header = RecordHeader(
        problem=record.problem,
        seed=record.seed,
        budget=record.budget,
        algo=record.algo,
        ref_point=record.ref_point,
        ref_hv=record.ref_hv,
        ref_source=record.ref_source,
        total_evals=record.total_evals,
        ledgers=record.ledgers,
        entries=len(record.trace),
    )
    lines = [header.model_dump_json()]
    for evals, hv in record.trace:
        diff = None if record.ref_hv is None else record.ref_hv - hv
        lines.append(json.dumps({"evals": evals, "hv": hv, "hv_diff": diff}))
    lines.append(RecordFooter(end=True, entries=len(record.trace)).model_dump_json())
    return "\n".join(lines) + "\n"


def loads_record(text: str) -> RunRecord:
    lines = text.splitlines()
    if not lines:
        raise RecordParseError("empty record", 1)
    try:
        header = RecordHeader.model_validate_json(lines[0])
    except ValidationError as e:
        raise RecordParseError(f"invalid header: {e.errors()[0]['msg']}", 1) from e

    trace: List[Tuple[int, float]] = []
    for number, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise RecordParseError(f"invalid JSON: {e.msg}", number) from e
        if isinstance(obj, dict) and obj.get("end") is True:
            try:
                footer = RecordFooter.model_validate(obj)
            except ValidationError as e:
                raise RecordParseError("invalid footer", number) from e
            if footer.entries != len(trace) or header.entries != len(trace):
                raise RecordParseError(
                    f"footer announces {footer.entries} entries, read {len(trace)}",
                    number,
                )
            if number != len(lines):
                raise RecordParseError("content after footer", number + 1)
            return RunRecord(
                trace=trace,
                **header.model_dump(exclude={"format", "version", "entries"}),
            )
        try:
            entry = TraceEntry.model_validate(obj)
        except ValidationError as e:
            raise RecordParseError(
                f"invalid trace entry: {e.errors()[0]['msg']}", number
            ) from e
        trace.append((entry.evals, entry.hv))
    raise RecordParseError("missing footer, record is truncated", len(lines) + 1)


def persist(record: RunRecord, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_record(record), encoding="utf-8")
    return path


def load(path: Path) -> RunRecord:
    return loads_record(path.read_text(encoding="utf-8"))
