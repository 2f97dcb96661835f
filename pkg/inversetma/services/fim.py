"""방위 전용(bearings-only) FIM 조립 및 9-성분 표현

표적 상태 [p_T(t_1), p_T(t_n)] 에 대한 한 샘플의 방위 기울기는
    ∇θ_i = (1/r_i)·[(1−α_i)cosθ_i, −(1−α_i)sinθ_i, α_i cosθ_i, −α_i sinθ_i]
이고 FIM 은 J = α_θ Σ ∇θ_i ∇θ_iᵀ 입니다 (α_θ = q2/σ²).
"""

import logging
import math
from typing import Iterable, Optional

import numpy as np
from scipy.stats import chi2

from inversetma.config import settings
from inversetma.errors import GeometryError, InvalidFimError
from inversetma.models.schemas import (
    ConstrainedPlatformState,
    EllipseParams,
    Fim,
    FimVec9,
    TargetState,
    TimeGrid,
    WeightVec,
)
from inversetma.services.motion import PlatformState, platform_track, target_track

logger = logging.getLogger(__name__)


def bearing_gradient(x_t: TargetState, x_p: PlatformState, grid: TimeGrid, i: int) -> np.ndarray:
    """샘플 i 의 방위 기울기 (4-벡터)"""
    idx = grid.check_index(i)
    a = float(grid.alpha[idx - 1])
    d = target_track(x_t, grid)[idx - 1] - platform_track(x_p, grid)[idx - 1]
    r2 = float(d @ d)
    if r2 == 0.0:
        raise GeometryError(f"표적과 플랫폼 위치가 일치합니다 (i={i})")
    # cosθ/r = Δη/r², sinθ/r = Δξ/r²
    yc, ys = d[1] / r2, d[0] / r2
    return np.array([(1.0 - a) * yc, -(1.0 - a) * ys, a * yc, -a * ys])


def bearing_dyad(theta: float) -> np.ndarray:
    """D(θ) = [[cos²θ, −½sin2θ], [−½sin2θ, sin²θ]]: 대각합 1, 랭크 1"""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c * c, -s * c], [-s * c, s * s]])


def unit_vec9_from_tracks(
    target: np.ndarray, platform: np.ndarray, alpha: np.ndarray
) -> np.ndarray:
    """α_θ = 1 인 FIM 의 9개 독립 성분을 샘플 합으로 직접 계산합니다.

    9개 합만으로 행렬을 구성하므로 J23 = J14, J12 블록 = J21 블록이 항상 정확히 성립합니다.
    """
    d = target - platform
    r2 = np.einsum("ij,ij->i", d, d)
    if np.any(r2 == 0.0):
        bad = int(np.flatnonzero(r2 == 0.0)[0]) + 1
        raise GeometryError(f"표적과 플랫폼 위치가 일치합니다 (i={bad})")

    yc = d[:, 1] / r2
    ys = d[:, 0] / r2
    cc, ss, cs = yc * yc, ys * ys, yc * ys

    w11 = (1.0 - alpha) ** 2
    w12 = alpha * (1.0 - alpha)
    w22 = alpha * alpha

    return np.array([
        w11 @ cc,
        w11 @ ss,
        w22 @ cc,
        w22 @ ss,
        -(w11 @ cs),
        w12 @ cc,
        -(w12 @ cs),
        w12 @ ss,
        -(w22 @ cs),
    ])


def _sample_mask(grid: TimeGrid, samples: Optional[Iterable[int]]) -> Optional[np.ndarray]:
    if samples is None:
        return None
    idx = sorted({grid.check_index(i) - 1 for i in samples})
    if not idx:
        raise ValueError("샘플 집합이 비어 있습니다")
    return np.asarray(idx)


def unit_fim_vec(
    x_t: TargetState,
    x_p: PlatformState,
    grid: TimeGrid,
    samples: Optional[Iterable[int]] = None,
) -> FimVec9:
    """α_θ = 1 로 조립한 FIM 의 9-성분 j_u"""
    target = target_track(x_t, grid)
    platform = platform_track(x_p, grid)
    alpha = grid.alpha
    sel = _sample_mask(grid, samples)
    if sel is not None:
        target, platform, alpha = target[sel], platform[sel], alpha[sel]
    return FimVec9(v=unit_vec9_from_tracks(target, platform, alpha))


def assemble_fim(
    x_t: TargetState,
    x_p: PlatformState,
    grid: TimeGrid,
    alpha_theta: float,
    samples: Optional[Iterable[int]] = None,
) -> Fim:
    """J = α_θ Σ_i ∇θ_i ∇θ_iᵀ. samples 를 주면 해당 1-based 샘플만 합산합니다."""
    if not (math.isfinite(alpha_theta) and alpha_theta > 0):
        raise ValueError(f"α_θ 는 양수여야 합니다 ({alpha_theta})")
    j_u = unit_fim_vec(x_t, x_p, grid, samples)
    return unpack9(FimVec9(v=alpha_theta * j_u.v))


def synthesize_observed(
    x_t_hat: TargetState,
    x_p_true: ConstrainedPlatformState,
    grid: TimeGrid,
    alpha_theta_true: float,
) -> Fim:
    """정보 생산자가 공개하는 J^obs: 잡음 없는 추정 표적 상태에서 평가"""
    fim = assemble_fim(x_t_hat, x_p_true, grid, alpha_theta_true)
    cond = fim_condition(fim)
    if cond > settings.FIM_CONDITION_LIMIT:
        logger.warning(f"[Synth] 관측 FIM 이 특이에 가깝습니다 (조건수 {cond:.3e})")
    return fim


def blocks(f: Fim) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(J11, J12, J21, J22) 2×2 블록 사본"""
    return f.j11.copy(), f.j12.copy(), f.j21.copy(), f.j22.copy()


def pack9(f: Fim) -> FimVec9:
    m = f.m
    scale = float(np.max(np.abs(m)))
    if abs(m[1, 2] - m[0, 3]) > 1e-9 * scale:
        raise InvalidFimError(f"J23 ≠ J14 ({m[1, 2]:.6e} vs {m[0, 3]:.6e})")
    return FimVec9(v=[m[0, 0], m[1, 1], m[2, 2], m[3, 3], m[0, 1], m[0, 2], m[0, 3], m[1, 3], m[2, 3]])


def unpack9(v: FimVec9) -> Fim:
    try:
        return Fim(m=v.to_matrix())
    except ValueError as e:
        raise InvalidFimError(f"9-성분으로 유효한 FIM 을 만들 수 없습니다: {e}") from e


def weight_vec() -> WeightVec:
    return WeightVec()


def weighted_norm_sq(v: FimVec9, weights: Optional[WeightVec] = None) -> float:
    """vᵀ W v = ‖unpack9(v)‖_F²"""
    w = (weights or weight_vec()).w
    return float(v.v @ (w * v.v))


def frobenius_sq(a: Fim, b: Optional[Fim] = None) -> float:
    """16개 성분 전체에 대한 ‖A − B‖_F² (b 생략 시 ‖A‖_F²)"""
    diff = a.m if b is None else a.m - b.m
    return float(np.sum(diff * diff))


def fim_condition(f: Fim) -> float:
    """2-노름 조건수: 특이 행렬은 inf"""
    s = np.linalg.svd(f.m, compute_uv=False)
    if s[-1] <= 0.0 or not np.isfinite(s[-1]):
        return math.inf
    return float(s[0] / s[-1])


def confidence_ellipse(cov: np.ndarray, level: float = 0.95) -> EllipseParams:
    """2×2 공분산의 level 신뢰 타원 (χ²₂ 분위수 기준)"""
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (2, 2):
        raise ValueError(f"공분산은 2×2 이어야 합니다 (shape={cov.shape})")
    if not 0.0 < level < 1.0:
        raise ValueError(f"신뢰수준은 (0, 1) 범위여야 합니다 ({level})")

    eigval, eigvec = np.linalg.eigh(0.5 * (cov + cov.T))
    if eigval[0] < 0:
        raise InvalidFimError("공분산이 양반정치가 아닙니다")
    scale = chi2.ppf(level, df=2)
    major = eigvec[:, 1]
    orientation = math.atan2(major[0], major[1])
    # 장축은 부호가 없는 방향이므로 (−π/2, π/2] 로 접음
    if orientation > math.pi / 2:
        orientation -= math.pi
    elif orientation <= -math.pi / 2:
        orientation += math.pi
    return EllipseParams(
        semi_major=math.sqrt(scale * eigval[1]),
        semi_minor=math.sqrt(scale * eigval[0]),
        orientation=orientation,
        level=level,
    )
