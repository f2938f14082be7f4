"""Command line entry point: ``run``, ``make-reference`` and ``report``."""

import argparse
import logging
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from .core import ParetoArchive
from .hybrid import component_run, try_reference
from .logging_config import get_logger, set_level
from .models import ALGORITHMS, NUM_PROBLEMS, ExperimentConfig, RunRecord
from .problems import make_problem
from .storage import RecordStore, write_reference

logger = get_logger(__name__)

REFERENCE_BUDGET_MULT = 10000.0
REFERENCE_SEEDS = 3

Task = Tuple[int, int, int, int, str, int, Path]


class UsageError(Exception):
    pass


def parse_int_list(text: str) -> List[int]:
    """``"1-5"``, ``"1,3"`` or mixes such as ``"1-3,7"``."""
    values: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            values.extend(range(int(lo), int(hi) + 1))
        else:
            values.append(int(part))
    if not values:
        raise argparse.ArgumentTypeError(f"empty list {text!r}")
    return values


def _seed_list(text: str) -> List[int]:
    """A bare count ``N`` means seeds ``0..N-1``; lists and ranges are literal."""
    if text.isdigit():
        return list(range(int(text)))
    return parse_int_list(text)


def _add_selection(parser: argparse.ArgumentParser) -> None:
    selection = parser.add_mutually_exclusive_group()
    selection.add_argument(
        "--problem",
        type=parse_int_list,
        dest="problems",
        help="problem ids, e.g. 1 or 1,4-6",
    )
    selection.add_argument("--suite", choices=["all"], help="all 55 problems")
    parser.add_argument("--dim", type=int, help="search space dimension")
    parser.add_argument(
        "--instances",
        "--instance",
        type=parse_int_list,
        dest="instances",
        help="instances, e.g. 1-5 or 1,3",
    )
    seeds = parser.add_mutually_exclusive_group()
    seeds.add_argument(
        "--seeds", type=_seed_list, help="seed count N (seeds 0..N-1) or a list"
    )
    seeds.add_argument("--seed", type=int, help="a single seed")
    parser.add_argument(
        "--budget-mult",
        type=float,
        dest="budget_mult",
        help="budget in evaluations per dimension",
    )
    parser.add_argument("--ref-dir", type=Path, dest="ref_dir")
    parser.add_argument("--jobs", type=int, help="parallel worker processes")
    parser.add_argument("--config", type=Path, help="TOML experiment file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hmocma",
        description="Hybrid bi-objective CMA-ES runs and hypervolume-target reports.",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="log at INFO")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the optimizer and write run records")
    _add_selection(run)
    run.add_argument("--algo", choices=ALGORITHMS)
    run.add_argument("--out", type=Path)

    ref = sub.add_parser("make-reference", help="write long-run reference fronts")
    _add_selection(ref)

    report = sub.add_parser("report", help="ECDF and aRT tables from run records")
    report.add_argument("--out", type=Path, default=Path("results"))
    report.add_argument(
        "--bootstrap-seed", type=int, dest="bootstrap_seed", default=0
    )
    return parser


def load_config(args: argparse.Namespace, **defaults: Any) -> ExperimentConfig:
    """Defaults, then the TOML file, then explicit flags."""
    values: Dict[str, Any] = dict(defaults)
    if getattr(args, "config", None) is not None:
        try:
            with open(args.config, "rb") as f:
                values.update(tomllib.load(f))
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}") from e
    if getattr(args, "suite", None) == "all":
        values["problems"] = list(range(1, NUM_PROBLEMS + 1))
    if getattr(args, "seed", None) is not None:
        values["seeds"] = [args.seed]
    for name in ExperimentConfig.model_fields:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        raise UsageError(str(e)) from e


def _tasks(cfg: ExperimentConfig) -> List[Task]:
    return [
        (k, cfg.dim, i, s, cfg.algo, cfg.budget(), cfg.ref_dir)
        for k in cfg.problems
        for i in cfg.instances
        for s in cfg.seeds
    ]


def run_task(task: Task) -> Tuple[RunRecord, ParetoArchive]:
    k, n, instance, seed, algo, budget, ref_dir = task
    p = make_problem(k, n, instance)
    return component_run(p, algo, budget, seed, try_reference(p, ref_dir))


def _execute(
    tasks: Sequence[Task], jobs: int
) -> Iterable[Tuple[RunRecord, ParetoArchive]]:
    if jobs <= 1:
        return map(run_task, tasks)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_task, tasks))


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    store = RecordStore(cfg.out)
    records = []
    for record, _ in _execute(_tasks(cfg), cfg.jobs):
        store.save(record)
        records.append(record)
    summary = store.write_summary(records)
    print(f"{len(records)} run(s) written to {store.records_dir}; summary {summary}")
    return 0


def cmd_make_reference(args: argparse.Namespace) -> int:
    cfg = load_config(
        args,
        budget_mult=REFERENCE_BUDGET_MULT,
        seeds=list(range(REFERENCE_SEEDS)),
    )
    fronts: Dict[Tuple[int, int], ParetoArchive] = {}
    for record, archive in _execute(_tasks(cfg), cfg.jobs):
        key = (record.problem.k, record.problem.instance)
        merged = fronts.setdefault(key, ParetoArchive(archive.ref_point))
        for member in archive.members:
            merged.insert(member)
    for (k, instance), archive in sorted(fronts.items()):
        p = make_problem(k, cfg.dim, instance)
        written = write_reference(p, archive, cfg.ref_dir)
        print(f"{p.key.stem()}: {len(written)} points, hv {written.hv!r}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    store = RecordStore(args.out)
    records = store.load_all()
    if not records:
        raise UsageError(f"no run records under {store.records_dir}")
    paths = store.write_report(records, args.bootstrap_seed)
    print(f"{len(paths)} report file(s) written under {store.root}")
    return 0


COMMANDS = {
    "run": cmd_run,
    "make-reference": cmd_make_reference,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.verbose:
        set_level(logging.INFO)
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"hmocma {args.command}: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception("Command failed", command=args.command)
        print(f"hmocma {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
