"""Request/response bodies for the HTTP service.

Requests embed the experiment configuration as a JSON object with the same
section structure as the TOML file; omitted sections take their documented
defaults. Output files are written server-side when `out` names a directory.
"""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class ConfiguredRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: dict = Field(default_factory=dict)
    seed: Optional[int] = None  # overrides [seeds].root
    out: Optional[str] = None  # server-side output directory


class SimulateRequest(ConfiguredRequest):
    duration: Optional[int] = None
    warmup: Optional[int] = None
    alpha: Optional[float] = None  # apply one alpha to every eNB


class EpisodeRow(BaseModel):
    episode_id: str
    enb_id: int
    alpha: float
    arrivals: int
    blocks: int
    completions: int
    bcr_pct: Optional[float]
    ftt_s: Optional[float]


class SimulateResponse(BaseModel):
    rows: list[EpisodeRow]
    mean_bcr: Optional[float]
    mean_ftt: Optional[float]
    files: dict[str, str] = Field(default_factory=dict)


class SweepRequest(ConfiguredRequest):
    alpha_min: Optional[float] = None
    alpha_max: Optional[float] = None
    alpha_step: Optional[float] = None


class SweepRow(BaseModel):
    alpha: float
    mean_bcr: Optional[float]
    mean_ftt: Optional[float]


class SweepResponse(BaseModel):
    rows: list[SweepRow]
    reference_alpha: Optional[float]
    files: dict[str, str] = Field(default_factory=dict)


class MatrixRequest(ConfiguredRequest):
    duration: Optional[int] = None


class MatrixResponse(BaseModel):
    ids: list[int]
    values_mw: list[list[float]]
    files: dict[str, str] = Field(default_factory=dict)


class FitRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x: list[float]
    y: list[float]
    out: Optional[str] = None


class FitResponse(BaseModel):
    beta0: float
    beta1: float
    y_lo: float
    y_hi: float
    n_samples: int
    residual_rms: float
    files: dict[str, str] = Field(default_factory=dict)


class ZoneRowModel(BaseModel):
    zone: str
    enb_id: int
    ref_bcr: Optional[float]
    opt_bcr: Optional[float]
    bcr_improvement_pct: Optional[float]
    ref_ftt: Optional[float]
    opt_ftt: Optional[float]
    ftt_improvement_pct: Optional[float]


class TraceIteration(BaseModel):
    k: int
    phase: str
    pivot_alpha: float
    alphas: dict[int, float]
    predicted_cost: Optional[float]
    measured_cost: Optional[float]
    feasible: bool


class HealResponse(BaseModel):
    faulty_enb: int
    tier1: list[int]
    tier2: list[int]
    converged: bool
    converged_alpha: float
    iterations: int
    measured_reference_cost: float
    measured_optimized_cost: float
    trace: list[TraceIteration]
    zone_rows: list[ZoneRowModel]
    files: dict[str, str] = Field(default_factory=dict)


class OracleHealRequest(ConfiguredRequest):
    pass


class OracleHealResponse(BaseModel):
    converged: bool
    converged_alpha: float
    true_alpha: float
    true_cost: float
    iterations: int
    trace: list[TraceIteration]
    files: dict[str, str] = Field(default_factory=dict)


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorBody(BaseModel):
    category: str
    message: str
