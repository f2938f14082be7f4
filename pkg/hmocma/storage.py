from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from .bench import (
    aggregate_ecdf,
    fraction_reached,
    function_label,
    group_label,
    load,
    persist,
    write_art_csv,
    write_ecdf_tsv,
)
from .core import ParetoArchive
from .logging_config import get_logger
from .models import ProblemKey, RunRecord
from .problems import BiObjectiveProblem, parse_reference, reference_path

logger = get_logger(__name__)


class RecordStore:
    """Run records and reports under one output directory.

    Layout: ``records/k{K}_n{N}_i{I}_s{S}.jsonl``, ``summary.csv``,
    ``art.csv`` and ``ecdf/*.tsv``.
    """

    def __init__(self, root: Path):
        self.root = Path(root)
        self.records_dir = self.root / "records"
        self.ecdf_dir = self.root / "ecdf"

    def record_path(self, key: ProblemKey, seed: int) -> Path:
        return self.records_dir / f"{key.stem()}_s{seed}.jsonl"

    def save(self, record: RunRecord) -> Path:
        path = persist(record, self.record_path(record.problem, record.seed))
        logger.info(
            "Saved run record",
            path=str(path),
            entries=len(record.trace),
            evals=record.total_evals,
        )
        return path

    def record_files(self) -> List[Path]:
        if not self.records_dir.is_dir():
            return []
        return sorted(self.records_dir.glob("*.jsonl"))

    def load_all(self) -> List[RunRecord]:
        return [load(path) for path in self.record_files()]

    def write_summary(self, records: Sequence[RunRecord]) -> Path:
        rows = []
        for r in records:
            rows.append(
                {
                    "k": r.problem.k,
                    "n": r.problem.n,
                    "instance": r.problem.instance,
                    "seed": r.seed,
                    "algo": r.algo,
                    "budget": r.budget,
                    "total_evals": r.total_evals,
                    "final_hv": r.final_hv,
                    "ref_hv": r.ref_hv,
                    "hv_diff": None if r.ref_hv is None else r.ref_hv - r.final_hv,
                    "fraction_reached": (
                        None
                        if r.ref_hv is None
                        else fraction_reached(r, r.total_evals)
                    ),
                    **{f"ledger_{name}": evals for name, evals in r.ledgers.items()},
                }
            )
        path = self.root / "summary.csv"
        self.root.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(rows).to_csv(path, index=False)
        logger.info("Wrote summary", path=str(path), runs=len(rows))
        return path

    def write_report(
        self, records: Sequence[RunRecord], bootstrap_seed: int = 0
    ) -> List[Path]:
        """ECDF curves per function, per category pair and over all functions
        (one set per dimension), plus the aRT table."""
        written: List[Path] = []
        by_dim: Dict[int, List[RunRecord]] = {}
        for r in records:
            by_dim.setdefault(r.problem.n, []).append(r)

        for n, group in sorted(by_dim.items()):
            curves: Dict[str, np.ndarray] = aggregate_ecdf(
                group, function_label, bootstrap_seed=bootstrap_seed
            )
            curves.update(
                {
                    f"group_{label}": curve
                    for label, curve in aggregate_ecdf(
                        group, group_label, bootstrap_seed=bootstrap_seed
                    ).items()
                }
            )
            curves.update(
                aggregate_ecdf(group, lambda r: "all", bootstrap_seed=bootstrap_seed)
            )
            for label, curve in curves.items():
                path = self.ecdf_dir / f"{label}_n{n}.tsv"
                write_ecdf_tsv(path, curve)
                written.append(path)

        art_path = self.root / "art.csv"
        write_art_csv(art_path, records)
        written.append(art_path)
        logger.info("Wrote report", files=len(written), runs=len(records))
        return written


def write_reference(
    p: BiObjectiveProblem, archive: ParetoArchive, ref_dir: Path
) -> ParetoArchive:
    """Write ``archive`` as the reference front of ``p``, merged with any
    front already on disk, and return the merged archive."""
    path = reference_path(p.key, ref_dir)
    merged = ParetoArchive(p.ref_point)
    if path.exists():
        for member in parse_reference(path.read_text().splitlines(), p.n).members:
            merged.insert(member)
    for member in archive.members:
        merged.insert(member)

    path.parent.mkdir(parents=True, exist_ok=True)
    r1, r2 = p.ref_point
    lines = [f"ref_point {r1!r} {r2!r}"] + merged.to_lines()
    path.write_text("\n".join(lines) + "\n")
    logger.info(
        "Wrote reference front",
        path=str(path),
        members=len(merged),
        hv=merged.hv,
    )
    return merged
