"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field, model_validator


class MetricRef(BaseModel):
    """A metric given by preset name or by inline TOML config text."""

    preset: Optional[str] = None
    config: Optional[str] = None

    @model_validator(mode="after")
    def _one_of(self):
        if (self.preset is None) == (self.config is None):
            raise ValueError("give exactly one of 'preset' or 'config'")
        return self


class GridSpec(BaseModel):
    points_per_dim: list[int]
    ranges: Optional[list[Optional[tuple[float, float]]]] = None
    boundary: Optional[list[str]] = None


class GeometryRequest(BaseModel):
    metric: MetricRef
    points: list[list[float]]


class PotentialRequest(BaseModel):
    metric: MetricRef
    points: list[list[float]]
    rules: list[str] = Field(default_factory=lambda: ["weyl", "rivier", "new"])
    hbar: float = 1.0
    mass: float = 1.0


class CoefficientRequest(BaseModel):
    metric: MetricRef
    points: list[list[float]]
    rules: list[str] = Field(default_factory=lambda: ["weyl", "rivier", "new"])
    fd_step: float = 0.02


class SpectrumRequest(BaseModel):
    metric: MetricRef
    grid: GridSpec
    count: int = 9
    rule: str = "new"
    vq_mode: str = "rule"
    hbar: float = 1.0
    mass: float = 1.0


class EvolveRequest(BaseModel):
    metric: MetricRef
    grid: GridSpec
    rule: str = "new"
    vq_mode: str = "rule"
    time: float
    steps: int = 100
    psi0: str = "gaussian"
    report_every: int = 10
    hbar: float = 1.0
    mass: float = 1.0


class PathintRequest(BaseModel):
    metric: MetricRef
    grid: GridSpec
    rule: str = "new"
    time: float
    slices: list[int]
    hbar: float = 1.0
    mass: float = 1.0


class RecordsResponse(BaseModel):
    records: list[dict]
