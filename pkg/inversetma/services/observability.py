"""관측성 분석: 동일 FIM 을 만드는 궤적 부분공간과 스텔스 조건

플랫폼을 표적 궤적 쪽으로 β 배 축소한 궤적
    p_P'(t) = β·p_P*(t) + (1−β)·p̂_T(t),  α_θ' = β²·α_θ*
은 모든 샘플에서 방위가 같고 거리만 β 배가 되므로 FIM 이 변하지 않습니다.
등속 제약 아래에서는 v̂_Tᵀ(v1 − v2) = 0 일 때만 이 부분공간이 살아남습니다.
"""

import logging
import math
from typing import Optional

import numpy as np

from inversetma.config import settings
from inversetma.errors import ConstraintViolationError
from inversetma.models.schemas import (
    ConstrainedPlatformState,
    Fim,
    ObservabilityReport,
    PlatformStateFree,
    SubspaceMember,
    TargetState,
    TimeGrid,
)
from inversetma.services.fim import fim_condition
from inversetma.services.motion import SPEED_RTOL, free_from_constrained

logger = logging.getLogger(__name__)


def subspace_member(
    x_p_star: PlatformStateFree,
    alpha_star: float,
    x_t_hat: TargetState,
    beta: float,
    grid: TimeGrid,
) -> SubspaceMember:
    """β 에 대응하는 FIM 불변 궤적 (β=1 이면 원래 궤적, β=0 이면 표적 위로 붕괴)"""
    if not math.isfinite(beta):
        raise ValueError(f"β 가 유한하지 않습니다 ({beta})")
    v_t = x_t_hat.velocity(grid)
    p1 = beta * np.asarray(x_p_star.p1) + (1.0 - beta) * np.asarray(x_t_hat.p1)
    v1 = beta * np.asarray(x_p_star.v1) + (1.0 - beta) * v_t
    v2 = beta * np.asarray(x_p_star.v2) + (1.0 - beta) * v_t
    member = PlatformStateFree(p1=tuple(p1.tolist()), v1=tuple(v1.tolist()), v2=tuple(v2.tolist()))
    return SubspaceMember(beta=beta, x_p=member, alpha_theta=beta * beta * alpha_star)


def _velocities(x_p) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(x_p, ConstrainedPlatformState):
        x_p = free_from_constrained(x_p)
    return np.asarray(x_p.v1, dtype=float), np.asarray(x_p.v2, dtype=float)


def speed_gap(x_p, v_t_hat: np.ndarray, beta: float) -> float:
    """‖v1'‖² − ‖v2'‖² = 2β(1−β)·v̂_Tᵀ(v1 − v2). 입력은 ‖v1‖ = ‖v2‖ 이어야 합니다."""
    v1, v2 = _velocities(x_p)
    s1, s2 = float(np.linalg.norm(v1)), float(np.linalg.norm(v2))
    if abs(s1 - s2) > SPEED_RTOL * max(s1, s2):
        raise ConstraintViolationError(f"두 구간 속력이 다릅니다 (‖v1‖={s1}, ‖v2‖={s2})")
    return 2.0 * beta * (1.0 - beta) * float(np.asarray(v_t_hat) @ (v1 - v2))


def is_stealthy(x_p, v_t_hat: np.ndarray, tol: Optional[float] = None) -> bool:
    """|v̂_Tᵀ(v1 − v2)| ≤ tol·‖v1 − v2‖·‖v̂_T‖: v1 = v2 (선회 없음) 이면 항상 True"""
    tol = settings.STEALTH_TOLERANCE if tol is None else tol
    v1, v2 = _velocities(x_p)
    diff = v1 - v2
    v_t = np.asarray(v_t_hat, dtype=float)
    return abs(float(v_t @ diff)) <= tol * float(np.linalg.norm(diff)) * float(np.linalg.norm(v_t))


def member_speeds(member: SubspaceMember) -> tuple[float, float]:
    return math.hypot(*member.x_p.v1), math.hypot(*member.x_p.v2)


def diagnose(
    x_p: ConstrainedPlatformState,
    v_t_hat: np.ndarray,
    tol: Optional[float] = None,
    j_obs: Optional[Fim] = None,
    *,
    x_t_hat: Optional[TargetState] = None,
    grid: Optional[TimeGrid] = None,
) -> ObservabilityReport:
    """x_t_hat, grid 를 주면 β=0.5 부분공간 원소의 두 구간 속력도 보고합니다.

    스텔스가 아니면 두 속력이 달라 등속 제약이 그 원소를 배제합니다.
    """
    v_t = np.asarray(v_t_hat, dtype=float)
    v1, v2 = _velocities(x_p)
    coefficient = float(v_t @ (v1 - v2))
    single_leg = bool(np.allclose(v1, v2, rtol=0.0, atol=SPEED_RTOL * max(x_p.s, 1.0)))
    stealthy = is_stealthy(x_p, v_t, tol)
    if stealthy:
        logger.warning(
            "[Identify] 스텔스 궤적: v̂_T ⟂ (v1 − v2), 스케일 모호성 부분공간이 존재합니다"
        )

    half_speeds = None
    if x_t_hat is not None and grid is not None:
        try:
            member = subspace_member(free_from_constrained(x_p), 1.0, x_t_hat, 0.5, grid)
        except ValueError as e:
            logger.warning(f"[Identify] β=0.5 부분공간 원소를 만들 수 없습니다: {e}")
        else:
            half_speeds = member_speeds(member)
            logger.debug(
                f"[Identify] β=0.5 동일 FIM 궤적 속력: {half_speeds[0]:.6g} / {half_speeds[1]:.6g} m/s"
            )

    return ObservabilityReport(
        stealthy=stealthy,
        single_leg=single_leg,
        turn_angle=x_p.turn_angle,
        speed_gap_coefficient=coefficient,
        fim_condition=fim_condition(j_obs) if j_obs is not None else math.nan,
        half_scale_speeds=half_speeds,
    )
