"""Pydantic 데이터 모델 정의

좌표는 (ξ, η) = (동, 북), 방위/방향각은 북쪽 기준 시계방향(라디안)입니다.
인덱스 i, k, m 은 모두 1-based 입니다.
"""

import math
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from inversetma.errors import SampleIndexError
from inversetma.utils import normalize_angle

Vec2 = tuple[float, float]
ZoneLabel = Literal["a", "b", "c"]

# FimVec9 슬롯 순서: J11, J22, J33, J44, J12, J13, J14, J24, J34 (1-based 행렬 인덱스)
VEC9_SLOTS: tuple[tuple[int, int], ...] = (
    (0, 0), (1, 1), (2, 2), (3, 3), (0, 1), (0, 2), (0, 3), (1, 3), (2, 3),
)
VEC9_NAMES: tuple[str, ...] = ("J11", "J22", "J33", "J44", "J12", "J13", "J14", "J24", "J34")
# 9-벡터 내적이 4×4 Frobenius 내적과 같아지도록 하는 중복 횟수 (J14 = J23 는 4번 등장)
FROBENIUS_WEIGHTS: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 4.0, 2.0, 2.0)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _finite_pair(v: Vec2, name: str) -> Vec2:
    if not all(math.isfinite(c) for c in v):
        raise ValueError(f"{name} 좌표가 유한하지 않습니다: {v}")
    return v


# ──────────────────────────────────────────────
# 시간 격자 / 상태 벡터
# ──────────────────────────────────────────────

class TimeGrid(BaseModel):
    """관측 시각 t_1 < ... < t_n 과 선회 인덱스 k (1 < k < n)"""
    model_config = ConfigDict(frozen=True)

    t: tuple[float, ...] = Field(description="관측 시각 (초), 엄격히 증가")
    k: int = Field(description="선회 인덱스 (1-based)")

    @model_validator(mode="after")
    def _check_grid(self) -> "TimeGrid":
        n = len(self.t)
        if n < 3:
            raise ValueError(f"관측 샘플은 3개 이상이어야 합니다 (n={n})")
        if not all(math.isfinite(x) for x in self.t):
            raise ValueError("관측 시각에 유한하지 않은 값이 있습니다")
        if any(b <= a for a, b in zip(self.t, self.t[1:])):
            raise ValueError("관측 시각은 엄격히 증가해야 합니다")
        if not 1 < self.k < n:
            raise ValueError(f"선회 인덱스는 1 < k < n 이어야 합니다 (k={self.k}, n={n})")
        return self

    @staticmethod
    def sample_count(duration: float, period: float) -> int:
        """균일 격자의 샘플 수 n = duration/period + 1"""
        if period <= 0 or duration <= 0:
            raise ValueError("duration, period 는 양수여야 합니다")
        ratio = duration / period
        count = round(ratio)
        if count < 1 or abs(ratio - count) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"duration/period 가 정수가 아닙니다 ({ratio})")
        return count + 1

    @classmethod
    def uniform(cls, start: float, duration: float, period: float, k: int) -> "TimeGrid":
        """균일 간격 격자: duration/period 가 정수여야 합니다."""
        n = cls.sample_count(duration, period)
        return cls(t=tuple(start + i * period for i in range(n)), k=k)

    @property
    def n(self) -> int:
        return len(self.t)

    @property
    def t1(self) -> float:
        return self.t[0]

    @property
    def tn(self) -> float:
        return self.t[-1]

    @property
    def tk(self) -> float:
        return self.t[self.k - 1]

    @property
    def duration(self) -> float:
        return self.tn - self.t1

    @property
    def times(self) -> np.ndarray:
        return _readonly(np.asarray(self.t, dtype=float))

    @property
    def alpha(self) -> np.ndarray:
        """정규화 시각 α_i = (t_i − t_1)/(t_n − t_1): α_1 = 0, α_n = 1"""
        t = np.asarray(self.t, dtype=float)
        return _readonly((t - t[0]) / (t[-1] - t[0]))

    def check_index(self, i: int) -> int:
        if not 1 <= int(i) <= self.n:
            raise SampleIndexError(f"샘플 인덱스 범위 초과: i={i}, n={self.n}")
        return int(i)

    def time(self, i: int) -> float:
        return self.t[self.check_index(i) - 1]

    def midpoint_index(self) -> int:
        """t_1 + (t_n − t_1)/2 에 가장 가까운 샘플 인덱스 (동률이면 앞쪽)"""
        mid = self.t1 + 0.5 * self.duration
        return int(np.argmin(np.abs(self.times - mid))) + 1

    def with_turn(self, k: int) -> "TimeGrid":
        return TimeGrid(t=self.t, k=k)


class TargetState(BaseModel):
    """표적 추정 상태 x̂_T = [p̂_T(t_1), p̂_T(t_n)]"""
    model_config = ConfigDict(frozen=True)

    p1: Vec2 = Field(description="t_1 에서의 표적 위치 (ξ, η)")
    pn: Vec2 = Field(description="t_n 에서의 표적 위치 (ξ, η)")

    @field_validator("p1", "pn")
    @classmethod
    def _finite(cls, v: Vec2) -> Vec2:
        return _finite_pair(v, "표적")

    @classmethod
    def from_velocity(cls, p1: Vec2, velocity: Vec2, grid: TimeGrid) -> "TargetState":
        d = grid.duration
        return cls(p1=p1, pn=(p1[0] + d * velocity[0], p1[1] + d * velocity[1]))

    def velocity(self, grid: TimeGrid) -> np.ndarray:
        """v̂_T = (p̂_T(t_n) − p̂_T(t_1)) / (t_n − t_1)"""
        return (np.asarray(self.pn) - np.asarray(self.p1)) / grid.duration

    def as_vector(self) -> np.ndarray:
        return np.array([*self.p1, *self.pn], dtype=float)


class PlatformStateFree(BaseModel):
    """자유 파라미터 플랫폼 상태 [p_P(t_1), v_1, v_2]: 속력 제약 없음"""
    model_config = ConfigDict(frozen=True)

    p1: Vec2
    v1: Vec2
    v2: Vec2

    @model_validator(mode="after")
    def _check(self) -> "PlatformStateFree":
        for name in ("p1", "v1", "v2"):
            _finite_pair(getattr(self, name), name)
        if self.v1 == (0.0, 0.0) and self.v2 == (0.0, 0.0):
            raise ValueError("v1, v2 가 모두 0 입니다")
        return self


class ConstrainedPlatformState(BaseModel):
    """등속 2구간 플랫폼 상태 x = [ξ, η, s, φ_1, φ_2]

    속도 v_j = s·(sin φ_j, cos φ_j), 각도는 (−π, π] 로 정규화되어 저장됩니다.
    """
    model_config = ConfigDict(frozen=True)

    xi: float
    eta: float
    s: float = Field(description="공통 속력 (m/s), 양수")
    phi1: float = Field(description="1구간 진행방향 (북 기준, rad)")
    phi2: float = Field(description="2구간 진행방향 (북 기준, rad)")

    @field_validator("xi", "eta", "phi1", "phi2")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("유한한 값이어야 합니다")
        return v

    @field_validator("s")
    @classmethod
    def _positive_speed(cls, v: float) -> float:
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"속력은 양수여야 합니다 (s={v})")
        return v

    @field_validator("phi1", "phi2")
    @classmethod
    def _wrap(cls, v: float) -> float:
        return normalize_angle(v)

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "ConstrainedPlatformState":
        """최적화 좌표 벡터를 상태로 변환: 음의 속력은 부호 반전 + 방향 π 회전으로 정리"""
        xi, eta, s, phi1, phi2 = (float(c) for c in x)
        if s < 0:
            s, phi1, phi2 = -s, phi1 + math.pi, phi2 + math.pi
        return cls(xi=xi, eta=eta, s=s, phi1=phi1, phi2=phi2)

    @property
    def p1(self) -> np.ndarray:
        return np.array([self.xi, self.eta])

    @property
    def v1(self) -> np.ndarray:
        return self.s * np.array([math.sin(self.phi1), math.cos(self.phi1)])

    @property
    def v2(self) -> np.ndarray:
        return self.s * np.array([math.sin(self.phi2), math.cos(self.phi2)])

    @property
    def turn_angle(self) -> float:
        return normalize_angle(self.phi2 - self.phi1)

    def as_vector(self) -> np.ndarray:
        return np.array([self.xi, self.eta, self.s, self.phi1, self.phi2], dtype=float)


class Waypoints(BaseModel):
    """플랫폼 경유점 (p(t_1), p(t_k), p(t_n))"""
    model_config = ConfigDict(frozen=True)

    p1: Vec2
    pk: Vec2
    pn: Vec2

    @model_validator(mode="after")
    def _check(self) -> "Waypoints":
        for name in ("p1", "pk", "pn"):
            _finite_pair(getattr(self, name), name)
        return self

    def leg_speeds(self, grid: TimeGrid) -> tuple[float, float]:
        d1 = math.dist(self.p1, self.pk)
        d2 = math.dist(self.pk, self.pn)
        return d1 / (grid.tk - grid.t1), d2 / (grid.tn - grid.tk)

    def is_equal_speed(self, grid: TimeGrid, rtol: float = 1e-9) -> bool:
        s1, s2 = self.leg_speeds(grid)
        return abs(s1 - s2) <= rtol * max(s1, s2)


# ──────────────────────────────────────────────
# FIM 표현
# ──────────────────────────────────────────────

class Fim(BaseModel):
    """표적 상태 [p_T(t_1), p_T(t_n)] 에 대한 4×4 Fisher 정보 행렬 (대칭, 양반정치)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    m: np.ndarray

    @field_validator("m", mode="before")
    @classmethod
    def _as_matrix(cls, v) -> np.ndarray:
        arr = np.array(v, dtype=float)
        if arr.shape != (4, 4):
            raise ValueError(f"FIM 은 4×4 이어야 합니다 (shape={arr.shape})")
        if not np.all(np.isfinite(arr)):
            raise ValueError("FIM 에 유한하지 않은 값이 있습니다")
        scale = float(np.max(np.abs(arr)))
        if np.max(np.abs(arr - arr.T)) > 1e-12 * scale:
            raise ValueError("FIM 이 대칭이 아닙니다")
        arr = 0.5 * (arr + arr.T)
        if scale > 0 and np.linalg.eigvalsh(arr)[0] < -1e-10 * scale:
            raise ValueError("FIM 이 양반정치가 아닙니다")
        return _readonly(arr)

    @property
    def j11(self) -> np.ndarray:
        return self.m[0:2, 0:2]

    @property
    def j12(self) -> np.ndarray:
        return self.m[0:2, 2:4]

    @property
    def j21(self) -> np.ndarray:
        return self.m[2:4, 0:2]

    @property
    def j22(self) -> np.ndarray:
        return self.m[2:4, 2:4]


class FimVec9(BaseModel):
    """FIM 의 독립 성분 9개 (J11, J22, J33, J44, J12, J13, J14, J24, J34)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    v: np.ndarray

    @field_validator("v", mode="before")
    @classmethod
    def _as_vec(cls, v) -> np.ndarray:
        arr = np.array(v, dtype=float).reshape(-1)
        if arr.shape != (9,):
            raise ValueError(f"FimVec9 은 9개 성분이어야 합니다 (len={arr.size})")
        if not np.all(np.isfinite(arr)):
            raise ValueError("FimVec9 에 유한하지 않은 값이 있습니다")
        return _readonly(arr)

    def to_matrix(self) -> np.ndarray:
        m = np.zeros((4, 4))
        for value, (r, c) in zip(self.v, VEC9_SLOTS):
            m[r, c] = value
            m[c, r] = value
        m[1, 2] = m[2, 1] = self.v[6]  # J23 = J14
        return m


class WeightVec(BaseModel):
    """Frobenius 노름 가중치 W = diag(1,1,1,1,2,2,4,2,2): 다른 값은 허용하지 않음"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    w: np.ndarray = Field(default_factory=lambda: np.array(FROBENIUS_WEIGHTS))

    @field_validator("w", mode="before")
    @classmethod
    def _fixed(cls, v) -> np.ndarray:
        arr = np.array(v, dtype=float).reshape(-1)
        if arr.shape != (9,) or not np.array_equal(arr, FROBENIUS_WEIGHTS):
            raise ValueError("가중치는 (1,1,1,1,2,2,4,2,2) 로 고정입니다")
        return _readonly(arr)


class ObservedProducts(BaseModel):
    """도청자(eavesdropper)가 확보한 산출물: J^obs, x̂_T, 시간 격자"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    j_obs: FimVec9
    x_t_hat: TargetState
    grid: TimeGrid

    @model_validator(mode="after")
    def _check_psd(self) -> "ObservedProducts":
        Fim(m=self.j_obs.to_matrix())
        return self

    def with_turn(self, k: int) -> "ObservedProducts":
        return ObservedProducts(j_obs=self.j_obs, x_t_hat=self.x_t_hat, grid=self.grid.with_turn(k))


class SubspaceMember(BaseModel):
    """동일 FIM 을 만드는 1-파라미터 궤적군의 원소 (β, x_P', α_θ')

    β = 0 이면 플랫폼이 표적 궤적 위로 붕괴된 퇴화 원소입니다.
    """
    model_config = ConfigDict(frozen=True)

    beta: float
    x_p: PlatformStateFree
    alpha_theta: float

    @property
    def is_degenerate(self) -> bool:
        return self.beta == 0.0


class EllipseParams(BaseModel):
    """2×2 공분산의 신뢰 타원"""
    model_config = ConfigDict(frozen=True)

    semi_major: float
    semi_minor: float
    orientation: float = Field(description="장축 방향 (북 기준, rad, (−π/2, π/2])")
    level: float


# ──────────────────────────────────────────────
# 초기 추정 / 최적화 / 식별 결과
# ──────────────────────────────────────────────

class AlphaBounds(BaseModel):
    """α_θ 사전 구간 [α_min, α_max]"""
    model_config = ConfigDict(frozen=True)

    alpha_min: float = Field(gt=0)
    alpha_max: float = Field(gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> "AlphaBounds":
        if not (math.isfinite(self.alpha_max) and self.alpha_min <= self.alpha_max):
            raise ValueError(f"α 구간이 올바르지 않습니다 ({self.alpha_min}, {self.alpha_max})")
        return self


class CandidateGuess(BaseModel):
    """α 격자점 m, 방향쌍 g 에 대한 초기 추정 후보"""
    model_config = ConfigDict(frozen=True)

    m: int
    g: int
    alpha_theta: float
    waypoints: Waypoints
    g_value: float = Field(description="축약 목적함수 G 값")
    r1_hat: float
    rn_hat: float
    chord_heading: float = Field(description="Γ = atan2(p̂_n − p̂_1), 북 기준")


class ZoneGuess(BaseModel):
    label: ZoneLabel
    candidate: CandidateGuess


class GuessSet(BaseModel):
    """영역별 최선 후보 + 전체 후보 목록"""
    zones: list[ZoneGuess]
    candidates: list[CandidateGuess]
    alpha_grid: tuple[float, ...]
    split: Optional[tuple[int, int]] = Field(
        default=None, description="Γ 부호가 바뀌는 (g*, m*): 없으면 None"
    )

    def zone(self, label: str) -> Optional[ZoneGuess]:
        return next((z for z in self.zones if z.label == label), None)


class SimplexParams(BaseModel):
    """Nelder–Mead 계수와 종료 조건"""
    model_config = ConfigDict(frozen=True)

    reflection: float = Field(default=1.0, gt=0)
    expansion: float = Field(default=2.0, gt=1)
    contraction: float = Field(default=0.5, gt=0, lt=1)
    shrink: float = Field(default=0.5, gt=0, lt=1)
    max_iterations: int = Field(default=20000, ge=1)
    f_tol: float = Field(default=1e-12, gt=0)
    x_tol: float = Field(default=1e-9, gt=0)
    restarts: int = Field(default=2, ge=0)
    steps: Optional[tuple[float, ...]] = Field(
        default=None, description="초기 심플렉스 축별 간격: None 이면 시작점에서 유도"
    )

    @model_validator(mode="after")
    def _check(self) -> "SimplexParams":
        if self.expansion <= self.reflection:
            raise ValueError("expansion 계수는 reflection 보다 커야 합니다")
        if self.steps is not None and not all(math.isfinite(s) and s != 0 for s in self.steps):
            raise ValueError("steps 는 0이 아닌 유한값이어야 합니다")
        return self


class TraceEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    iteration: int
    g_best: float
    rspe: Optional[float] = None


class NelderMeadResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    x: np.ndarray
    value: float
    iterations: int
    restarts_used: int = 0
    converged: bool = False
    trace: list[TraceEntry] = Field(default_factory=list)


class ObservabilityReport(BaseModel):
    """식별된 궤적의 관측성 진단"""
    stealthy: bool = Field(description="v̂_T ⟂ (v1 − v2): 속력 보존 부분공간 존재")
    single_leg: bool = Field(description="v1 = v2 (선회 없음)")
    turn_angle: float
    speed_gap_coefficient: float = Field(description="v̂_Tᵀ(v1 − v2)")
    fim_condition: float
    half_scale_speeds: Optional[tuple[float, float]] = Field(
        default=None, description="β=0.5 동일 FIM 궤적의 구간별 속력 (‖v1'‖, ‖v2'‖)"
    )


class ZoneResult(BaseModel):
    label: ZoneLabel
    initial: ConstrainedPlatformState
    state: Optional[ConstrainedPlatformState] = None
    g_value: Optional[float] = None
    iterations: int = 0
    rspe: Optional[float] = None
    trace: list[TraceEntry] = Field(default_factory=list)
    error: Optional[str] = None


class IdentificationResult(BaseModel):
    state: ConstrainedPlatformState
    alpha_theta_hat: float
    g_best: float
    g_upper_bound: float
    f_residual_ratio: float = Field(description="F(x*, α̂) / j_obsᵀ W j_obs")
    winning_zone: ZoneLabel
    zones: list[ZoneResult]
    rspe: Optional[float] = None
    observability: ObservabilityReport


class SensitivityEntry(BaseModel):
    k: int
    rspe: Optional[float] = None
    g_best: Optional[float] = None
    error: Optional[str] = None
