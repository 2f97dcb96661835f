"""표적/플랫폼 운동 모델

- 표적: 등속 직선 운동, 상태는 두 끝점 [p_T(t_1), p_T(t_n)]
- 플랫폼: t_k 에서 한 번 선회하는 2구간 등속 운동
- 방위: θ = atan2(Δξ, Δη): 북쪽 기준 시계방향
"""

import logging
import math
from typing import Union

import numpy as np

from inversetma.errors import ConstraintViolationError, GeometryError
from inversetma.models.schemas import (
    ConstrainedPlatformState,
    PlatformStateFree,
    TargetState,
    TimeGrid,
    Waypoints,
)
from inversetma.utils import normalize_angle

logger = logging.getLogger(__name__)

PlatformState = Union[PlatformStateFree, ConstrainedPlatformState]

__all__ = [
    "PlatformState",
    "normalize_angle",
    "target_position",
    "target_track",
    "platform_position",
    "platform_track",
    "waypoint_track",
    "bearing",
    "target_range",
    "free_from_constrained",
    "constrained_from_free",
    "waypoints_from_state",
    "state_from_waypoints",
    "heading_vector",
]

# 등속 제약 판정 상대 허용오차
SPEED_RTOL = 1e-9


def heading_vector(phi: float) -> np.ndarray:
    """북 기준 방향각 φ 의 단위벡터 (sin φ, cos φ)"""
    return np.array([math.sin(phi), math.cos(phi)])


def _legs(x_p: PlatformState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(x_p, ConstrainedPlatformState):
        return x_p.p1, x_p.v1, x_p.v2
    return np.asarray(x_p.p1, dtype=float), np.asarray(x_p.v1, dtype=float), np.asarray(x_p.v2, dtype=float)


def target_position(x_t: TargetState, grid: TimeGrid, i: int) -> np.ndarray:
    """p_T(t_i) = (1 − α_i)·p_T(t_1) + α_i·p_T(t_n): i=1, i=n 에서 끝점과 정확히 일치"""
    idx = grid.check_index(i)
    a = float(grid.alpha[idx - 1])
    return (1.0 - a) * np.asarray(x_t.p1) + a * np.asarray(x_t.pn)


def target_track(x_t: TargetState, grid: TimeGrid) -> np.ndarray:
    """전체 샘플의 표적 위치 (n×2)"""
    a = grid.alpha[:, None]
    return (1.0 - a) * np.asarray(x_t.p1) + a * np.asarray(x_t.pn)


def platform_position(x_p: PlatformState, grid: TimeGrid, i: int) -> np.ndarray:
    """p_P(t_i): t_i < t_k 는 1구간, t_i ≥ t_k 는 선회점 기준 2구간"""
    idx = grid.check_index(i)
    p1, v1, v2 = _legs(x_p)
    t = grid.t[idx - 1]
    tau1 = min(t, grid.tk) - grid.t1
    tau2 = max(t - grid.tk, 0.0)
    return p1 + tau1 * v1 + tau2 * v2


def platform_track(x_p: PlatformState, grid: TimeGrid) -> np.ndarray:
    """전체 샘플의 플랫폼 위치 (n×2). 선회점에서 연속."""
    p1, v1, v2 = _legs(x_p)
    t = grid.times
    tau1 = (np.minimum(t, grid.tk) - grid.t1)[:, None]
    tau2 = np.maximum(t - grid.tk, 0.0)[:, None]
    return p1 + tau1 * v1 + tau2 * v2


def waypoint_track(w: Waypoints, grid: TimeGrid) -> np.ndarray:
    """경유점을 직선으로 이은 궤적 (n×2): 등속 여부와 무관"""
    p1, pk, pn = (np.asarray(p, dtype=float) for p in (w.p1, w.pk, w.pn))
    t = grid.times[:, None]
    leg1 = p1 + (t - grid.t1) / (grid.tk - grid.t1) * (pk - p1)
    leg2 = pk + (t - grid.tk) / (grid.tn - grid.tk) * (pn - pk)
    return np.where(t < grid.tk, leg1, leg2)


def _relative(x_t: TargetState, x_p: PlatformState, grid: TimeGrid, i: int) -> np.ndarray:
    d = target_position(x_t, grid, i) - platform_position(x_p, grid, i)
    if d[0] == 0.0 and d[1] == 0.0:
        raise GeometryError(f"표적과 플랫폼 위치가 일치합니다 (i={i})")
    return d


def bearing(x_t: TargetState, x_p: PlatformState, grid: TimeGrid, i: int) -> float:
    """θ_i = atan2(Δξ, Δη), (−π, π] 범위"""
    d = _relative(x_t, x_p, grid, i)
    return normalize_angle(math.atan2(d[0], d[1]))


def target_range(x_t: TargetState, x_p: PlatformState, grid: TimeGrid, i: int) -> float:
    d = _relative(x_t, x_p, grid, i)
    return math.hypot(d[0], d[1])


def free_from_constrained(x: ConstrainedPlatformState) -> PlatformStateFree:
    return PlatformStateFree(
        p1=(x.xi, x.eta),
        v1=tuple(x.v1.tolist()),
        v2=tuple(x.v2.tolist()),
    )


def constrained_from_free(x: PlatformStateFree) -> ConstrainedPlatformState:
    """‖v1‖ = ‖v2‖ > 0 인 자유 상태를 [ξ, η, s, φ1, φ2] 로 변환"""
    s1 = math.hypot(*x.v1)
    s2 = math.hypot(*x.v2)
    if s1 == 0.0 or s2 == 0.0:
        raise ConstraintViolationError("속력이 0인 구간이 있습니다")
    if abs(s1 - s2) > SPEED_RTOL * max(s1, s2):
        raise ConstraintViolationError(f"두 구간 속력이 다릅니다 (‖v1‖={s1}, ‖v2‖={s2})")
    return ConstrainedPlatformState(
        xi=x.p1[0],
        eta=x.p1[1],
        s=0.5 * (s1 + s2),
        phi1=math.atan2(x.v1[0], x.v1[1]),
        phi2=math.atan2(x.v2[0], x.v2[1]),
    )


def waypoints_from_state(x: ConstrainedPlatformState, grid: TimeGrid) -> Waypoints:
    pk = x.p1 + (grid.tk - grid.t1) * x.v1
    pn = pk + (grid.tn - grid.tk) * x.v2
    return Waypoints(p1=(x.xi, x.eta), pk=tuple(pk.tolist()), pn=tuple(pn.tolist()))


def state_from_waypoints(w: Waypoints, grid: TimeGrid) -> ConstrainedPlatformState:
    """경유점 → 상태. 두 구간의 속력이 같아야 합니다 (상대오차 1e-9)."""
    s1, s2 = w.leg_speeds(grid)
    if s1 == 0.0 or s2 == 0.0:
        raise ConstraintViolationError("길이가 0인 구간이 있어 방향을 정할 수 없습니다")
    if not w.is_equal_speed(grid, SPEED_RTOL):
        raise ConstraintViolationError(f"두 구간 속력이 다릅니다 ({s1:.6g} vs {s2:.6g} m/s)")
    d1 = np.subtract(w.pk, w.p1)
    d2 = np.subtract(w.pn, w.pk)
    return ConstrainedPlatformState(
        xi=w.p1[0],
        eta=w.p1[1],
        s=0.5 * (s1 + s2),
        phi1=math.atan2(d1[0], d1[1]),
        phi2=math.atan2(d2[0], d2[1]),
    )
