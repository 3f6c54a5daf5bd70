"""Pydantic request/response models for the simulation service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class SimConfigModel(BaseModel):
    start_time: float = 1995.0
    end_time: float = 2022.0
    dt: float = 1.0 / 16.0
    save_interval: float = 1.0


class RunRequest(BaseModel):
    scenario: str = "base"
    overrides: dict[str, float] = Field(default_factory=dict)
    config: SimConfigModel = Field(default_factory=SimConfigModel)


class RunResponse(BaseModel):
    scenario: str
    times: list[float]
    traces: dict[str, list[float]]
    warnings: list[str] = Field(default_factory=list)


class CompareRequest(BaseModel):
    scenarios: list[str] = Field(min_length=2)
    overrides: dict[str, float] = Field(default_factory=dict)
    config: SimConfigModel = Field(default_factory=SimConfigModel)
    variables: list[str] = Field(
        default_factory=lambda: [
            "pbr",
            "healthcare_allocation",
            "vul_pop",
            "total_pop",
        ]
    )


class CrossingFinding(BaseModel):
    variable: str
    scenario: str
    crossing_years: list[float]
    delta_at_end: float


class CompareResponse(BaseModel):
    baseline: str
    times: list[float]
    runs: dict[str, RunResponse]
    findings: list[CrossingFinding]


class SeriesPoints(BaseModel):
    years: list[int]
    values: list[float]


class FreeParameterModel(BaseModel):
    name: str
    lower: float
    upper: float
    initial: float


class TerminationModel(BaseModel):
    max_evaluations: int = 2000
    tolerance: float = 1e-8


class CalibrateRequest(BaseModel):
    series: dict[str, SeriesPoints]
    free: list[FreeParameterModel] = Field(default_factory=list)
    weights: dict[str, float] | None = None
    scenario: str = "base"
    overrides: dict[str, float] = Field(default_factory=dict)
    config: SimConfigModel | None = None
    termination: TerminationModel = Field(default_factory=TerminationModel)


class SeriesMetrics(BaseModel):
    rmse: float
    mape: float


class CalibrateResponse(BaseModel):
    values: dict[str, float]
    objective: float
    initial_objective: float
    evaluations: int
    per_series: dict[str, SeriesMetrics]
    times: list[float]
    traces: dict[str, list[float]]
