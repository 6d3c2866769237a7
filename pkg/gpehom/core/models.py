# Validated user-facing models: problem, tracer and run configuration, run report.
from __future__ import annotations
from typing import List, Optional, Tuple, Literal, Dict, Any
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

Potential = Literal["harmonic", "tabulated"]
Kind = Literal["diag", "blocktridiag", "pentadiag"]
PathStatus = Literal["converged", "degenerate_endgame", "ds_underflow", "max_steps", "singular", "error"]


class ProblemSpec(BaseModel):
    """Discretized problem: dimension, domain, grid sizes, beta and trap.

    ``domain`` is ``(a, b)`` in 1D and ``(a, b, c, d)`` in 2D; ``m`` counts
    interior points along x and ``n`` along y (``n`` alone in 1D).
    """
    model_config = {"extra": "forbid", "frozen": True}

    dim: int = Field(default=1, ge=1, le=2)
    domain: Tuple[float, ...]
    n: int = Field(ge=1)
    m: Optional[int] = Field(default=None, ge=1)
    beta: float = Field(default=0.0, ge=0.0)
    potential: Potential = "harmonic"
    potential_values: Optional[Tuple[float, ...]] = None

    @model_validator(mode="after")
    def _check_geometry(self):
        if self.dim == 1:
            if len(self.domain) != 2:
                raise ValueError("1D domain must be (a, b)")
            if self.m is not None:
                raise ValueError("m is only used for 2D problems")
        else:
            if len(self.domain) != 4:
                raise ValueError("2D domain must be (a, b, c, d)")
            if self.m is None:
                raise ValueError("2D problems require m (interior points along x)")
            if not self.domain[3] > self.domain[2]:
                raise ValueError(f"domain requires d > c, got c={self.domain[2]}, d={self.domain[3]}")
        if not self.domain[1] > self.domain[0]:
            raise ValueError(f"domain requires b > a, got a={self.domain[0]}, b={self.domain[1]}")
        if self.potential == "tabulated":
            if self.potential_values is None or len(self.potential_values) != self.size:
                raise ValueError(f"tabulated potential needs exactly {self.size} values")
        elif self.potential_values is not None:
            raise ValueError("potential_values given but potential is not 'tabulated'")
        return self

    @property
    def size(self) -> int:
        return self.n if self.dim == 1 else int(self.m) * self.n

    @property
    def symmetric_interval(self) -> bool:
        return self.dim == 1 and abs(self.domain[0] + self.domain[1]) <= 1e-12 * abs(self.domain[1])


class TraceConfig(BaseModel):
    """Predictor-corrector settings."""
    model_config = {"extra": "forbid", "frozen": True}

    ds0: float = Field(default=0.01, gt=0.0)
    ds_min: float = Field(default=1e-8, gt=0.0)
    ds_max: float = Field(default=0.1, gt=0.0)
    angle_halve_deg: float = 18.0
    angle_double_deg: float = 6.0
    newton_tol: float = Field(default=1e-10, gt=0.0)
    newton_max_iter: int = Field(default=10, ge=1)
    max_steps: int = Field(default=100000, ge=1)
    endgame_max_failures: int = Field(default=3, ge=1)
    damped_max_iter: int = Field(default=40, ge=1)
    sigma_min_iter: int = Field(default=10, ge=1)
    record_states: bool = False

    @model_validator(mode="after")
    def _check_ranges(self):
        if not (self.ds_min < self.ds0 <= self.ds_max):
            raise ValueError(f"step sizes must satisfy 0 < ds_min < ds0 <= ds_max, got "
                             f"{self.ds_min}, {self.ds0}, {self.ds_max}")
        if not (0.0 < self.angle_double_deg < self.angle_halve_deg < 90.0):
            raise ValueError("angles must satisfy 0 < angle_double_deg < angle_halve_deg < 90")
        return self


def parse_path_indices(text: str) -> List[int]:
    """'1-3,7' -> [1, 2, 3, 7]; order kept, duplicates dropped."""
    out: List[int] = []
    for chunk in str(text).replace(" ", "").split(","):
        if not chunk:
            continue
        if "-" in chunk:
            lo_s, hi_s = chunk.split("-", 1)
            lo, hi = int(lo_s), int(hi_s)
            if hi < lo:
                raise ValueError(f"invalid path range '{chunk}'")
            values = range(lo, hi + 1)
        else:
            values = [int(chunk)]
        for v in values:
            if v < 1:
                raise ValueError(f"path indices are 1-based, got {v}")
            if v not in out:
                out.append(v)
    if not out:
        raise ValueError("paths must select at least one path")
    return out


class RunConfig(BaseModel):
    """Flat run configuration, one field per config-file key."""
    model_config = {"extra": "forbid"}

    dim: int = Field(default=1, ge=1, le=2)
    x_min: float
    x_max: float
    y_min: Optional[float] = None
    y_max: Optional[float] = None
    n: int = Field(ge=1)
    m: Optional[int] = Field(default=None, ge=1)
    beta: float = Field(default=0.0, ge=0.0)
    potential: Potential = "harmonic"
    potential_file: Optional[str] = None
    seed: int = Field(default=0, ge=0)
    sigma: Optional[float] = Field(default=None, ge=0.0)
    kind: Optional[Kind] = None
    paths: str = "1"
    workers: Optional[int] = Field(default=None, ge=1)
    out: Optional[str] = None
    # tracer
    ds0: float = 0.01
    ds_min: float = 1e-8
    ds_max: float = 0.1
    angle_halve_deg: float = 18.0
    angle_double_deg: float = 6.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 10
    max_steps: int = 100000
    endgame_max_failures: int = 3

    @field_validator("paths", mode="before")
    @classmethod
    def _validate_paths(cls, v):
        v = str(v)
        parse_path_indices(v)
        return v.replace(" ", "")

    @model_validator(mode="after")
    def _check_consistency(self):
        if self.kind == "diag" and self.dim != 1:
            raise ValueError("kind 'diag' is only valid for dim=1")
        if self.kind in ("blocktridiag", "pentadiag") and self.dim != 2:
            raise ValueError(f"kind '{self.kind}' is only valid for dim=2")
        if self.potential == "tabulated" and not self.potential_file:
            raise ValueError("potential 'tabulated' requires potential_file")
        # surface geometry and tracer errors at load time
        try:
            self.to_trace_config()
            if self.potential == "harmonic":
                self.to_problem_spec()
        except ValidationError as e:
            raise ValueError(str(e)) from e
        return self

    @property
    def path_indices(self) -> List[int]:
        return parse_path_indices(self.paths)

    @property
    def resolved_kind(self) -> str:
        return self.kind or ("diag" if self.dim == 1 else "blocktridiag")

    def to_problem_spec(self, potential_values: Optional[Tuple[float, ...]] = None) -> ProblemSpec:
        domain: Tuple[float, ...] = (self.x_min, self.x_max)
        if self.dim == 2:
            if self.y_min is None or self.y_max is None:
                raise ValueError("2D problems require y_min and y_max")
            domain = (self.x_min, self.x_max, self.y_min, self.y_max)
        return ProblemSpec(
            dim=self.dim,
            domain=domain,
            n=self.n,
            m=self.m if self.dim == 2 else None,
            beta=self.beta,
            potential=self.potential,
            potential_values=potential_values,
        )

    def to_trace_config(self, record_states: bool = False) -> TraceConfig:
        return TraceConfig(
            ds0=self.ds0,
            ds_min=self.ds_min,
            ds_max=self.ds_max,
            angle_halve_deg=self.angle_halve_deg,
            angle_double_deg=self.angle_double_deg,
            newton_tol=self.newton_tol,
            newton_max_iter=self.newton_max_iter,
            max_steps=self.max_steps,
            endgame_max_failures=self.endgame_max_failures,
            record_states=record_states,
        )

    def echo(self) -> Dict[str, Any]:
        """Keys recorded in run reports; the worker count does not change results."""
        return self.model_dump(exclude_none=True, exclude={"workers"})


class PathSummary(BaseModel):
    index: int
    status: PathStatus
    initial_lambda: float
    lam: Optional[float] = None
    residual: Optional[float] = None
    flags: List[str] = Field(default_factory=list)
    steps: int = 0
    corrector_rejects: int = 0
    angle_rejects: int = 0
    orientation_flips: int = 0
    final_t: Optional[float] = None
    sigma_min_floor: Optional[float] = None
    eigenvector_file: Optional[str] = None
    path_log_file: Optional[str] = None
    message: str = ""


class CheckSummary(BaseModel):
    name: str
    passed: bool
    applicable: bool = True
    hard: bool = True
    message: str = ""
    details: Dict[str, Any] = Field(default_factory=dict)


class RunReport(BaseModel):
    version: str
    config: Dict[str, Any]
    problem: Dict[str, Any]
    paths: List[PathSummary]
    checks: List[CheckSummary] = Field(default_factory=list)
    timings: Dict[str, float] = Field(default_factory=dict)

    @property
    def all_failed(self) -> bool:
        return bool(self.paths) and all(p.status != "converged" for p in self.paths)

    @property
    def hard_failures(self) -> List[CheckSummary]:
        return [c for c in self.checks if c.hard and c.applicable and not c.passed]
