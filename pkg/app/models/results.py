"""Result models: interference statistics, outage values, trials and sweep curves."""
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.params import FluidAntennaGeometry, ModelOptions, NetworkParams, PilotBudget

Engine = Literal["analytic_exact", "analytic_mean", "monte_carlo"]
SweepVariable = Literal["P", "N", "lambda_b", "Le", "kappa", "epsilon", "delta_phi", "theta"]

CURVE_COLUMNS = [
    "index", "engine", "feasible", "p_dl", "p_ul", "rate", "p_dl_err", "p_ul_err", "rate_err", "note",
]


class InterferenceStats(BaseModel):
    """Conditional interference moments at one port and serving distance."""
    model_config = ConfigDict(frozen=True)

    rho: float
    port: int
    mean_dl_bs: float = Field(..., ge=0)
    mean_dl_ue: float = Field(..., ge=0)
    mean_ul_bs: float = Field(..., ge=0)
    mean_ul_ue: float = Field(..., ge=0)
    var_total_dl: float = Field(..., ge=0)
    var_total_ul: float = Field(..., ge=0)
    gamma_dl: Tuple[float, float] = Field(..., description="(shape, scale) of the DL interference.")
    gamma_ul: Tuple[float, float] = Field(..., description="(shape, scale) of the UL interference.")

    @property
    def mean_dl(self) -> float:
        return self.mean_dl_bs + self.mean_dl_ue

    @property
    def mean_ul(self) -> float:
        return self.mean_ul_bs + self.mean_ul_ue


class OutageResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float = Field(..., ge=0, le=1)
    engine: Literal["exact_gamma", "mean_approx", "monte_carlo"]
    quadrature_error_estimate: float = Field(0.0, ge=0)

    @property
    def coverage(self) -> float:
        return 1.0 - self.value


class TrialConfig(BaseModel):
    """Everything one Monte Carlo run needs; trial seeds derive from base_seed."""
    model_config = ConfigDict(frozen=True)

    params: NetworkParams
    fa: FluidAntennaGeometry
    budget: PilotBudget
    n_trials: int = Field(10_000, ge=1)
    base_seed: int = Field(2024, ge=0)
    r_sim: Optional[float] = Field(None, gt=0, description="Window radius in m; scaled from 3000 m at 5e-5 BS/m² when unset.")
    options: ModelOptions = Field(default_factory=ModelOptions)

    @property
    def csi_mode(self) -> str:
        return self.options.csi_mode


class TrialOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    trial_index: int
    valid: bool
    n_bs: int = 0
    rho: float = float("nan")
    selected_port: Optional[int] = None
    sinr_dl: float = float("nan")
    sinr_ul: float = float("nan")
    outage_dl: Optional[bool] = None
    outage_ul: Optional[bool] = None
    rate_contribution: float = float("nan")


class SweepSpec(BaseModel):
    """One curve: a variable swept over a grid with fixed overrides on top of the config."""
    name: str = Field("sweep", min_length=1)
    variable: SweepVariable
    grid: List[Union[float, str]] = Field(..., min_length=1)
    engines: List[Engine] = Field(..., min_length=1)
    metrics: List[Literal["outage", "rate"]] = Field(default_factory=lambda: ["outage", "rate"], min_length=1)
    overrides: Dict[str, Any] = Field(default_factory=dict)
    output_path: Optional[str] = None

    @field_validator("engines")
    @classmethod
    def _unique_engines(cls, value: List[str]) -> List[str]:
        if len(set(value)) != len(value):
            raise ValueError("engines must not repeat")
        return value


class CurvePoint(BaseModel):
    index: int = Field(..., ge=0)
    x: float
    engine: Engine
    feasible: bool
    p_dl: Optional[float] = None
    p_ul: Optional[float] = None
    rate: Optional[float] = None
    p_dl_err: Optional[float] = None
    p_ul_err: Optional[float] = None
    rate_err: Optional[float] = None
    note: str = ""


class Provenance(BaseModel):
    config_hash: str
    base_seed: int
    code_version: str
    sweep: Dict[str, Any]
    config: Dict[str, Any]


class PerfCurve(BaseModel):
    name: str
    variable: SweepVariable
    abscissa: List[float]
    points: List[CurvePoint]
    provenance: Provenance

    @model_validator(mode="after")
    def _check_points(self) -> "PerfCurve":
        for point in self.points:
            if point.index >= len(self.abscissa):
                raise ValueError(f"point index {point.index} outside a grid of {len(self.abscissa)}")
            if point.x != self.abscissa[point.index]:
                raise ValueError(f"point {point.index} has x={point.x}, grid says {self.abscissa[point.index]}")
        return self

    @property
    def engines(self) -> List[str]:
        return sorted({point.engine for point in self.points})

    def series(self, engine: str) -> List[CurvePoint]:
        return sorted((p for p in self.points if p.engine == engine), key=lambda p: p.index)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"index": p.index, self.variable: p.x, **p.model_dump(exclude={"index", "x"})}
            for p in sorted(self.points, key=lambda p: (p.index, p.engine))
        ]
        columns = ["index", self.variable] + CURVE_COLUMNS[1:]
        return pd.DataFrame(rows, columns=columns)


class PointGap(BaseModel):
    index: int
    x: float
    gap_p_dl: Optional[float] = None
    gap_p_ul: Optional[float] = None
    rel_gap_rate: Optional[float] = None
    tolerance_p: Optional[float] = None
    passed: Optional[bool] = None


class ComparisonReport(BaseModel):
    """Pointwise gaps between two engines of one curve."""
    reference: Engine
    candidate: Engine
    mode: Literal["acceptance", "documentation"]
    gaps: List[PointGap]
    max_gap_p_dl: Optional[float] = None
    max_gap_p_ul: Optional[float] = None
    max_rel_gap_rate: Optional[float] = None
    passed: Optional[bool] = None


class OracleCheck(BaseModel):
    """One comparison of a formula against an independent estimate."""
    group: Literal["special_functions", "interference_means", "pilot_mse", "joint_cdf"]
    name: str
    value: float
    reference: float
    error: float = Field(..., ge=0)
    tolerance: float = Field(..., ge=0)
    passed: bool
    informational: bool = Field(False, description="Reported for the record; does not fail the suite.")


class OracleReport(BaseModel):
    checks: List[OracleCheck]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks if not check.informational)

    def failures(self) -> List[OracleCheck]:
        return [check for check in self.checks if not check.passed and not check.informational]
