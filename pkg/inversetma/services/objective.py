"""FIM 정합 목적함수

F(x, α_θ) = ‖J^obs − J(x, α_θ)‖_F² 는 α_θ 에 대해 2차식이므로 닫힌 해
α̂ = j_uᵀW j_obs / j_uᵀW j_u 로 소거할 수 있고, 이때
F(x, α̂) = j_obsᵀW j_obs − G(x),  G(x) = (j_uᵀW j_obs)² / (j_uᵀW j_u)
입니다. 식별은 G 의 최대화로 수행합니다.
"""

import logging
import math
from typing import Optional

import numpy as np

from inversetma.errors import GeometryError, InverseTmaError
from inversetma.models.schemas import ConstrainedPlatformState, ObservedProducts
from inversetma.services.fim import unit_vec9_from_tracks, weight_vec
from inversetma.services.motion import platform_track, target_track

logger = logging.getLogger(__name__)

# ‖j_u‖ 가 이보다 작으면 방향이 정의되지 않는 퇴화 기하로 취급
DEGENERATE_NORM = 1e-300


def _unit_vec(obs: ObservedProducts, x: ConstrainedPlatformState) -> np.ndarray:
    grid = obs.grid
    j_u = unit_vec9_from_tracks(target_track(obs.x_t_hat, grid), platform_track(x, grid), grid.alpha)
    if not np.all(np.isfinite(j_u)) or np.linalg.norm(j_u) < DEGENERATE_NORM:
        raise GeometryError("단위 FIM 이 퇴화되었습니다")
    return j_u


def frobenius_objective(obs: ObservedProducts, x: ConstrainedPlatformState, alpha_theta: float) -> float:
    """F(x, α_θ) = Σ W (j_obs − α_θ j_u)²"""
    if not (math.isfinite(alpha_theta) and alpha_theta >= 0):
        raise ValueError(f"α_θ 는 0 이상이어야 합니다 ({alpha_theta})")
    w = weight_vec().w
    residual = obs.j_obs.v - alpha_theta * _unit_vec(obs, x)
    return float(residual @ (w * residual))


def alpha_theta_ls(obs: ObservedProducts, x: ConstrainedPlatformState) -> float:
    """주어진 궤적에서 F 를 최소화하는 α̂_θ (음수일 수 있음)"""
    w = weight_vec().w
    j_u = _unit_vec(obs, x)
    return float((j_u @ (w * obs.j_obs.v)) / (j_u @ (w * j_u)))


def reduced_objective_G(obs: ObservedProducts, x: ConstrainedPlatformState) -> float:
    w = weight_vec().w
    j_u = _unit_vec(obs, x)
    num = j_u @ (w * obs.j_obs.v)
    return float(num * num / (j_u @ (w * j_u)))


class ReducedObjective:
    """최적화 루프용 G 평가기: 5-벡터 [ξ, η, s, φ1, φ2] 를 직접 받습니다.

    표적 궤적, 시간 가중치 등은 생성 시 한 번만 계산합니다.
    기하가 퇴화된 점에서는 −inf 를 돌려줍니다.
    """

    def __init__(self, obs: ObservedProducts):
        self.obs = obs
        grid = obs.grid
        self._alpha = np.array(grid.alpha)
        self._target = target_track(obs.x_t_hat, grid)
        t = grid.times
        self._tau1 = (np.minimum(t, grid.tk) - grid.t1)[:, None]
        self._tau2 = np.maximum(t - grid.tk, 0.0)[:, None]
        self._w_jobs = weight_vec().w * obs.j_obs.v
        self._w = weight_vec().w
        self.upper_bound = float(obs.j_obs.v @ self._w_jobs)
        self.evaluations = 0

    def track(self, vec: np.ndarray) -> np.ndarray:
        xi, eta, s, phi1, phi2 = vec
        v1 = s * np.array([math.sin(phi1), math.cos(phi1)])
        v2 = s * np.array([math.sin(phi2), math.cos(phi2)])
        return np.array([xi, eta]) + self._tau1 * v1 + self._tau2 * v2

    def unit_vec(self, vec: np.ndarray) -> Optional[np.ndarray]:
        if not np.all(np.isfinite(vec)):
            return None
        try:
            j_u = unit_vec9_from_tracks(self._target, self.track(vec), self._alpha)
        except InverseTmaError:
            return None
        if not np.all(np.isfinite(j_u)) or np.linalg.norm(j_u) < DEGENERATE_NORM:
            return None
        return j_u

    def __call__(self, vec: np.ndarray) -> float:
        self.evaluations += 1
        j_u = self.unit_vec(vec)
        if j_u is None:
            return -math.inf
        num = j_u @ self._w_jobs
        return float(num * num / (j_u @ (self._w * j_u)))

    def alpha_theta_ls(self, vec: np.ndarray) -> float:
        j_u = self.unit_vec(vec)
        if j_u is None:
            raise GeometryError("퇴화 기하에서는 α̂_θ 를 계산할 수 없습니다")
        return float((j_u @ self._w_jobs) / (j_u @ (self._w * j_u)))

    def residual_sq(self, vec: np.ndarray, alpha_theta: float) -> float:
        """F = Σ W (j_obs − α_θ j_u)²"""
        j_u = self.unit_vec(vec)
        if j_u is None:
            raise GeometryError("퇴화 기하에서는 F 를 계산할 수 없습니다")
        residual = self.obs.j_obs.v - alpha_theta * j_u
        return float(residual @ (self._w * residual))
