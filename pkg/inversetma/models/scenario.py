"""시나리오 설정 모델: `key = value` 설정 파일의 검증 스키마

파일 형식은 docs/scenario-format.md 참고.
"""

import math
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator, model_validator

from inversetma.models.schemas import (
    AlphaBounds,
    ConstrainedPlatformState,
    SimplexParams,
    TargetState,
    TimeGrid,
)
from inversetma.services.initguess import alpha_bounds_from_ranges
from inversetma.utils import parse_index_range, parse_number

_STRICT = ConfigDict(extra="forbid", frozen=True)


class GridSpec(BaseModel):
    model_config = _STRICT

    start: float = 0.0
    duration: float = Field(gt=0, description="관측 구간 길이 (s)")
    period: float = Field(gt=0, description="샘플 간격 (s)")
    k: int = Field(description="선회 인덱스 (1-based)")

    @field_validator("period")
    @classmethod
    def _divides_duration(cls, v: float, info: ValidationInfo) -> float:
        if "duration" in info.data:
            TimeGrid.sample_count(info.data["duration"], v)
        return v

    @field_validator("k")
    @classmethod
    def _interior(cls, v: int, info: ValidationInfo) -> int:
        if "duration" in info.data and "period" in info.data:
            n = TimeGrid.sample_count(info.data["duration"], info.data["period"])
            if not 1 < v < n:
                raise ValueError(f"선회 인덱스는 1 < k < n 이어야 합니다 (k={v}, n={n})")
        return v

    @model_validator(mode="after")
    def _check(self) -> "GridSpec":
        self.build()
        return self

    def build(self) -> TimeGrid:
        return TimeGrid.uniform(self.start, self.duration, self.period, self.k)


class TargetSpec(BaseModel):
    """표적 추정 상태: t_1 위치와 속도"""
    model_config = _STRICT

    xi: float
    eta: float
    vxi: float
    veta: float

    def build(self, grid: TimeGrid) -> TargetState:
        return TargetState.from_velocity((self.xi, self.eta), (self.vxi, self.veta), grid)


class PlatformSpec(BaseModel):
    """참 플랫폼 상태 [ξ, η, s, φ1, φ2]: 각도는 라디안, `3*pi/4` 표기 허용"""
    model_config = _STRICT

    xi: float
    eta: float
    speed: float = Field(gt=0)
    phi1: float
    phi2: float

    @field_validator("phi1", "phi2", mode="before")
    @classmethod
    def _angle(cls, v: Any) -> Any:
        return parse_number(v)

    def build(self) -> ConstrainedPlatformState:
        return ConstrainedPlatformState(xi=self.xi, eta=self.eta, s=self.speed, phi1=self.phi1, phi2=self.phi2)


class SensorSpec(BaseModel):
    """정보 생산자 측 α_θ: 직접 값 또는 (q2, σ_θ[deg])"""
    model_config = _STRICT

    alpha_theta: Optional[float] = Field(default=None, gt=0)
    q2: Optional[float] = Field(default=None, gt=0, le=1)
    sigma_deg: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _one_form(self) -> "SensorSpec":
        direct = self.alpha_theta is not None
        ranged = self.q2 is not None or self.sigma_deg is not None
        if direct == ranged:
            raise ValueError("sensor.alpha_theta 또는 (sensor.q2, sensor.sigma_deg) 중 하나만 지정해야 합니다")
        if ranged and (self.q2 is None or self.sigma_deg is None):
            raise ValueError("sensor.q2 와 sensor.sigma_deg 는 함께 지정해야 합니다")
        return self

    @property
    def value(self) -> float:
        if self.alpha_theta is not None:
            return self.alpha_theta
        sigma = math.radians(self.sigma_deg)
        return self.q2 / (sigma * sigma)


class EavesdropperSpec(BaseModel):
    """도청자 측 사전 지식: α_θ 구간, 격자 크기, 선회 인덱스 탐색 범위"""
    model_config = _STRICT

    alpha_min: Optional[float] = Field(default=None, gt=0)
    alpha_max: Optional[float] = Field(default=None, gt=0)
    q2_min: Optional[float] = Field(default=None, gt=0, le=1)
    q2_max: Optional[float] = Field(default=None, gt=0, le=1)
    sigma_min_deg: Optional[float] = Field(default=None, gt=0)
    sigma_max_deg: Optional[float] = Field(default=None, gt=0)
    n_theta: int = Field(default=5, ge=3)
    k_known: bool = True
    k_sweep: Optional[str] = Field(default=None, description="LO:HI 또는 LO:HI:STEP")

    @model_validator(mode="after")
    def _check(self) -> "EavesdropperSpec":
        direct = (self.alpha_min, self.alpha_max)
        ranged = (self.q2_min, self.q2_max, self.sigma_min_deg, self.sigma_max_deg)
        has_direct = any(v is not None for v in direct)
        has_ranged = any(v is not None for v in ranged)
        if has_direct == has_ranged:
            raise ValueError("α 구간은 alpha_min/alpha_max 또는 q2_*/sigma_*_deg 중 한 형식으로만 지정해야 합니다")
        if (has_direct and None in direct) or (has_ranged and None in ranged):
            raise ValueError("α 구간 항목이 일부 누락되었습니다")
        self.bounds()
        if self.k_sweep is not None:
            parse_index_range(self.k_sweep)
        return self

    def bounds(self) -> AlphaBounds:
        if self.alpha_min is not None:
            return AlphaBounds(alpha_min=self.alpha_min, alpha_max=self.alpha_max)
        return alpha_bounds_from_ranges(
            (self.q2_min, self.q2_max),
            (math.radians(self.sigma_min_deg), math.radians(self.sigma_max_deg)),
        )

    def k_candidates(self) -> list[int]:
        if self.k_sweep is None:
            return []
        lo, hi, step = parse_index_range(self.k_sweep)
        return list(range(lo, hi + 1, step))


class OptimizerSpec(BaseModel):
    model_config = _STRICT

    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    max_iterations: int = 20000
    f_tol: float = 1e-12
    x_tol: float = 1e-9
    restarts: int = 2

    @model_validator(mode="after")
    def _check(self) -> "OptimizerSpec":
        self.to_params()
        return self

    def to_params(self) -> SimplexParams:
        return SimplexParams(**self.model_dump())


class OutputSpec(BaseModel):
    model_config = _STRICT

    dir: Optional[str] = None


class ScenarioConfig(BaseModel):
    """시나리오 설정 전체. platform/sensor 는 합성(synth)과 RSPE 평가에만 필요합니다."""
    model_config = _STRICT

    name: str = "scenario"
    grid: GridSpec
    target: TargetSpec
    platform: Optional[PlatformSpec] = None
    sensor: Optional[SensorSpec] = None
    eavesdropper: EavesdropperSpec
    optimizer: OptimizerSpec = Field(default_factory=OptimizerSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)

    @property
    def time_grid(self) -> TimeGrid:
        return self.grid.build()

    @property
    def target_state(self) -> TargetState:
        return self.target.build(self.time_grid)

    @property
    def truth(self) -> Optional[ConstrainedPlatformState]:
        return self.platform.build() if self.platform is not None else None
