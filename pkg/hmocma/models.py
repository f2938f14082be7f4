import os
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .core import ObjectiveVector

NUM_PROBLEMS = 55
ALGORITHMS = ("hybrid", "warmstart", "ss-mocma", "ipop-mocma", "restart-cma")

Algorithm = Literal["hybrid", "warmstart", "ss-mocma", "ipop-mocma", "restart-cma"]


class ProblemKey(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(..., description="Pair index of the two base functions, 1..55.")
    n: int = Field(..., description="Search space dimension.")
    instance: int = Field(..., description="Instance number, 1-based.")

    @field_validator("k")
    def validate_k(cls, v):
        if not 1 <= v <= NUM_PROBLEMS:
            raise ValueError(f"k must be in 1..{NUM_PROBLEMS}, got {v}")
        return v

    @field_validator("n")
    def validate_n(cls, v):
        if v < 2:
            raise ValueError(f"dimension must be at least 2, got {v}")
        return v

    @field_validator("instance")
    def validate_instance(cls, v):
        if v < 1:
            raise ValueError(f"instance must be positive, got {v}")
        return v

    def stem(self) -> str:
        return f"k{self.k}_n{self.n}_i{self.instance}"


class ReferenceData(BaseModel):
    model_config = ConfigDict(frozen=True)

    ref_point: ObjectiveVector
    ref_hv: float = Field(..., description="Best-known dominated hypervolume.")
    source: Literal["analytic", "long_run"]

    @field_validator("ref_hv")
    def validate_ref_hv(cls, v):
        if not v > 0:
            raise ValueError(f"ref_hv must be positive, got {v}")
        return v


class RunRecord(BaseModel):
    problem: ProblemKey
    seed: int
    budget: int
    algo: str = "hybrid"
    ref_point: ObjectiveVector
    ref_hv: Optional[float] = Field(
        None, description="Reference hypervolume, absent when no reference exists."
    )
    ref_source: Optional[str] = None
    total_evals: int
    ledgers: Dict[str, int] = Field(default_factory=dict)
    trace: List[Tuple[int, float]] = Field(
        default_factory=list,
        description="(eval_index, archive hypervolume) at every strict increase.",
    )

    @property
    def final_hv(self) -> float:
        return self.trace[-1][1] if self.trace else 0.0


class RecordHeader(BaseModel):
    """First line of a record file; everything but the trace."""

    format: Literal["hmocma-run"] = "hmocma-run"
    version: int = 1
    problem: ProblemKey
    seed: int
    budget: int
    algo: str
    ref_point: ObjectiveVector
    ref_hv: Optional[float] = None
    ref_source: Optional[str] = None
    total_evals: int
    ledgers: Dict[str, int]
    entries: int


class TraceEntry(BaseModel):
    evals: int
    hv: float
    hv_diff: Optional[float] = None


class RecordFooter(BaseModel):
    end: Literal[True]
    entries: int


class ExperimentConfig(BaseModel):
    problems: List[int] = Field(
        default_factory=lambda: list(range(1, NUM_PROBLEMS + 1))
    )
    dim: int = 5
    instances: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    seeds: List[int] = Field(default_factory=lambda: [0])
    budget_mult: float = 1000.0
    algo: Algorithm = "hybrid"
    out: Path = Path("results")
    ref_dir: Path = Field(
        default_factory=lambda: Path(os.getenv("HMOCMA_REF_DIR", "refs"))
    )
    bootstrap_seed: int = 0
    jobs: int = 1

    @field_validator("problems")
    def validate_problems(cls, v):
        if not v:
            raise ValueError("at least one problem is required")
        for k in v:
            if not 1 <= k <= NUM_PROBLEMS:
                raise ValueError(f"problem ids must be in 1..{NUM_PROBLEMS}, got {k}")
        return v

    @field_validator("dim")
    def validate_dim(cls, v):
        if v < 2:
            raise ValueError(f"dim must be at least 2, got {v}")
        return v

    @field_validator("instances")
    def validate_instances(cls, v):
        if not v or min(v) < 1:
            raise ValueError("instances must be positive integers")
        return v

    @field_validator("budget_mult")
    def validate_budget_mult(cls, v):
        if not v > 0:
            raise ValueError(f"budget_mult must be positive, got {v}")
        return v

    @field_validator("jobs")
    def validate_jobs(cls, v):
        if v < 1:
            raise ValueError(f"jobs must be at least 1, got {v}")
        return v

    def budget(self) -> int:
        return int(round(self.budget_mult * self.dim))
