"""Request/response models for the solver service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class EigenRequest(BaseModel):
    kappa: float
    count: int = Field(default=25, ge=1, le=200)
    root_tol: float = Field(default=1e-10, gt=0)
    quad_tol: float = Field(default=1e-10, gt=0)


class EigenModeModel(BaseModel):
    n: int
    alpha: float
    lambda_tau: float
    norm: float
    amp: float


class EigenResponse(BaseModel):
    kappa: float
    count: int
    root_tol: float
    quad_tol: float
    z_max: float
    modes: list[EigenModeModel]


class CurveModel(BaseModel):
    abscissa: list[float]
    values: list[float]
    stderr: list[float] | None = None
    meta: dict


class SurvivalRequest(BaseModel):
    kappas: list[float] = Field(min_length=1)
    zs: list[float] = Field(min_length=1)
    t_min: float = Field(default=0.0, ge=0)
    t_max: float = Field(default=6.0, gt=0)
    points: int = Field(default=121, ge=2, le=100_000)
    terms: int = Field(default=25, ge=1)
    clamp: bool = True


class FptRequest(BaseModel):
    kappas: list[float] = Field(min_length=1)
    zs: list[float] = Field(min_length=1)
    t_min: float = Field(default=0.0, ge=0)
    t_max: float = Field(default=1.0, gt=0)
    points: int = Field(default=97, ge=2, le=100_000)
    terms: int = Field(default=50, ge=1)


class MfptRequest(BaseModel):
    kappas: list[float] = Field(min_length=1)
    z_min: float = Field(default=1.0, ge=1.0)
    z_max: float = Field(default=20.0)
    points: int = Field(default=77, ge=2, le=100_000)
    terms: int = Field(default=25, ge=1)


class CurvesResponse(BaseModel):
    curves: list[CurveModel]


class SimulateRequest(BaseModel):
    kappa: float
    z0: float
    dt_over_tau: float = 1e-3
    horizon_over_tau: float = 5.0
    trajectories: int = Field(default=100_000, ge=1)
    master_seed: int = 0
    grid: list[float] | None = None
    compare: bool = False
    terms: int = Field(default=25, ge=1)
    tolerance: float = Field(default=0.01, gt=0)
    compare_from: float = Field(default=0.2, ge=0)
    include_samples: bool = False
    workers: int = Field(default=1, ge=1, le=64)


class SimulateResponse(BaseModel):
    empirical: CurveModel
    theory: CurveModel | None = None
    max_abs_gap: float | None = None
    tolerance: float | None = None
    comparison_passed: bool | None = None
    censored_count: int
    samples: list[list[float]] | None = None


class EscapeRequest(BaseModel):
    kappas: list[float] = Field(min_length=1)
    z_min: float = Field(default=1.0, ge=1.0)
    z_max: float = Field(default=20.0)
    points: int = Field(default=39, ge=2, le=100_000)


class EscapeResponse(BaseModel):
    z: list[float]
    escape_probability: list[float]
    amplitudes: list[dict]  # {"kappa": float, "values": [float]}


class ConvertRequest(BaseModel):
    k: float
    zeta: float
    L: float
    r0: float
    D: float | None = None
    temperature: float | None = None


class ConvertResponse(BaseModel):
    kappa: float
    z: float
    tau_seconds: float
    relaxation_rate_hz: float
    D: float
    temperature: float
    equilibrium: dict


class VerifyRequest(BaseModel):
    criteria: list[int] | None = None
    workers: int = Field(default=1, ge=1, le=64)


class CriterionModel(BaseModel):
    cid: int
    description: str
    passed: bool
    details: dict
    seconds: float
    note: str = ""


class VerifyResponse(BaseModel):
    results: list[CriterionModel]
    all_passed: bool
