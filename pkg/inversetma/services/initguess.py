"""J^obs 로부터 플랫폼 궤적 초기 추정값 생성

흐름:
1. α_θ 격자 {α_m} 를 사전 구간에서 균일하게 생성
2. 각 α_m 에서 대각 블록 대각합으로 끝점 거리 r̂_1, r̂_n 추정
3. Schur 보수 공분산의 주축으로 시선 방향 î_1, î_n 추정 (부호 2가지 → 방향쌍 g=1,2)
4. J12 블록으로 중간 시각의 탐침점 p̃_m 추정
5. 끝점 현(chord)을 빗변으로 하는 직각 삼각형의 두 선회점 중 탐침점에 가까운 쪽 선택
6. 현 방향각 Γ 의 부호가 바뀌는 곳에서 후보를 영역(zone) a/b/c 로 나누고 영역별 최대 G 후보 선택
"""

import logging
import math
from typing import Optional

import numpy as np

from inversetma.config import settings
from inversetma.errors import (
    AmbiguousAxisError,
    GeometryError,
    IdentificationError,
    InvalidFimError,
    InverseTmaError,
    UnobservableGeometryError,
)
from inversetma.models.schemas import (
    AlphaBounds,
    CandidateGuess,
    Fim,
    GuessSet,
    ObservedProducts,
    TargetState,
    TimeGrid,
    Waypoints,
    ZoneGuess,
)
from inversetma.services.fim import unpack9
from inversetma.services.motion import heading_vector, state_from_waypoints, target_position
from inversetma.services.objective import ReducedObjective

logger = logging.getLogger(__name__)

# 고유값 중복 판정 상대 허용오차
EIG_REPEAT_RTOL = 1e-12


# ──────────────────────────────────────────────
# α_θ 격자
# ──────────────────────────────────────────────

def alpha_grid(bounds: AlphaBounds, n_theta: int) -> np.ndarray:
    """α_m = α_min + (m−1)/(N−1)·(α_max − α_min), m = 1..N"""
    if n_theta < 2:
        raise ValueError(f"α 격자 크기는 2 이상이어야 합니다 (N={n_theta})")
    lo, hi = bounds.alpha_min, bounds.alpha_max
    grid = lo + np.arange(n_theta) / (n_theta - 1) * (hi - lo)
    grid[-1] = hi
    return grid


def alpha_bounds_from_ranges(
    q2_range: tuple[float, float], sigma_range: tuple[float, float]
) -> AlphaBounds:
    """α_θ = q2/σ² 의 구간. σ 는 라디안."""
    (q_lo, q_hi), (s_lo, s_hi) = q2_range, sigma_range
    if not (0 < q_lo <= q_hi and 0 < s_lo <= s_hi):
        raise ValueError(f"q2/σ 구간이 올바르지 않습니다 (q2={q2_range}, σ={sigma_range})")
    return AlphaBounds(alpha_min=q_lo / (s_hi * s_hi), alpha_max=q_hi / (s_lo * s_lo))


def n_theta_min(bounds: AlphaBounds) -> int:
    """격자 중 하나가 참값의 절반 구간 안에 반드시 들어오도록 하는 최소 격자 크기"""
    ratio = 0.5 * (bounds.alpha_min + bounds.alpha_max) / bounds.alpha_min
    return math.ceil(ratio) + 1


def n_theta_known_alpha(bounds: AlphaBounds, alpha_theta: float) -> float:
    """α_θ 를 알고 있을 때의 격자 밀도 기준 (α_max − α_min)/(2α_θ) + 1: 참고용"""
    if not alpha_theta > 0:
        raise ValueError(f"α_θ 는 양수여야 합니다 ({alpha_theta})")
    return (bounds.alpha_max - bounds.alpha_min) / (2.0 * alpha_theta) + 1.0


# ──────────────────────────────────────────────
# 2×2 고유분해 / 거리·방향 추정
# ──────────────────────────────────────────────

def symmetric_eig2(a: np.ndarray) -> tuple[float, float, np.ndarray, np.ndarray]:
    """2×2 대칭 행렬의 (λ_max, λ_min, e_max, e_min): 중복 고유값이면 AmbiguousAxisError"""
    a = np.asarray(a, dtype=float)
    p, q, d = a[0, 0], 0.5 * (a[0, 1] + a[1, 0]), a[1, 1]
    mean = 0.5 * (p + d)
    rad = math.hypot(0.5 * (p - d), q)
    lam_max, lam_min = mean + rad, mean - rad
    if lam_max - lam_min <= EIG_REPEAT_RTOL * (abs(lam_max) + abs(lam_min)):
        raise AmbiguousAxisError(f"고유값이 중복되어 주축이 정의되지 않습니다 (λ={lam_max:.6e})")
    omega = 0.5 * math.atan2(2.0 * q, p - d)
    e_max = np.array([math.cos(omega), math.sin(omega)])
    e_min = np.array([-math.sin(omega), math.cos(omega)])
    return lam_max, lam_min, e_max, e_min


def range_estimates(j_obs: Fim, grid: TimeGrid, alpha_theta: float) -> tuple[float, float]:
    """r̂_1 = √(α Σ(1−α_i)² / tr J11), r̂_n = √(α Σα_i² / tr J22)"""
    if not alpha_theta > 0:
        raise ValueError(f"α_θ 는 양수여야 합니다 ({alpha_theta})")
    tr11 = j_obs.m[0, 0] + j_obs.m[1, 1]
    tr22 = j_obs.m[2, 2] + j_obs.m[3, 3]
    if tr11 <= 0 or tr22 <= 0:
        raise InvalidFimError("대각 블록의 대각합이 양수가 아닙니다")
    a = grid.alpha
    r1 = math.sqrt(alpha_theta * float(np.sum((1.0 - a) ** 2)) / tr11)
    rn = math.sqrt(alpha_theta * float(np.sum(a * a)) / tr22)
    return r1, rn


def covariance_blocks(j_obs: Fim) -> tuple[np.ndarray, np.ndarray]:
    """C11 = (J11 − J12 J22⁻¹ J21)⁻¹, C22 = (J22 − J21 J11⁻¹ J12)⁻¹"""
    cond = np.linalg.cond(j_obs.m)
    if not np.isfinite(cond) or cond > settings.FIM_CONDITION_LIMIT:
        raise UnobservableGeometryError(f"관측 FIM 조건수가 너무 큽니다 ({cond:.3e})")
    j11, j12, j21, j22 = j_obs.j11, j_obs.j12, j_obs.j21, j_obs.j22
    try:
        s1 = j11 - j12 @ np.linalg.solve(j22, j21)
        s2 = j22 - j21 @ np.linalg.solve(j11, j12)
        return np.linalg.inv(s1), np.linalg.inv(s2)
    except np.linalg.LinAlgError as e:
        raise UnobservableGeometryError(f"Schur 보수를 역변환할 수 없습니다: {e}") from e


def bearing_axes(j_obs: Fim) -> tuple[np.ndarray, np.ndarray]:
    """t_1, t_n 의 시선 방향 단위벡터 (부호 미정): 공분산 블록의 장축"""
    c11, c22 = covariance_blocks(j_obs)
    return symmetric_eig2(c11)[2], symmetric_eig2(c22)[2]


def cross_track_unit(v_t_hat: np.ndarray) -> np.ndarray:
    """u = v̂_T 를 +π/2 회전한 단위벡터"""
    v = np.asarray(v_t_hat, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise GeometryError("표적 속도가 0 이라 기준 방향을 정할 수 없습니다")
    return np.array([-v[1], v[0]]) / norm


def admissible_pairs(
    i1: np.ndarray, i_n: np.ndarray, v_t_hat: np.ndarray
) -> list[tuple[np.ndarray, np.ndarray]]:
    """두 끝점이 표적 항적의 같은 쪽에 있는 방향쌍 2개: g=1 은 ⟨î_1, u⟩ > 0 인 쪽"""
    u = cross_track_unit(v_t_hat)
    d1 = float(np.asarray(i1) @ u)
    dn = float(np.asarray(i_n) @ u)
    if d1 == 0.0 or dn == 0.0:
        raise GeometryError("시선 방향이 표적 항적과 평행하여 부호를 정할 수 없습니다")
    a1 = np.asarray(i1, dtype=float) * math.copysign(1.0, d1)
    an = np.asarray(i_n, dtype=float) * math.copysign(1.0, dn)
    return [(a1, an), (-a1, -an)]


def endpoint_guesses(
    x_t_hat: TargetState, r1: float, rn: float, pairs: list[tuple[np.ndarray, np.ndarray]]
) -> list[tuple[np.ndarray, np.ndarray]]:
    """p̂_1^g = p̂_T(t_1) + r̂_1 î_1^g, p̂_n^g = p̂_T(t_n) + r̂_n î_n^g"""
    pt1, ptn = np.asarray(x_t_hat.p1), np.asarray(x_t_hat.pn)
    return [(pt1 + r1 * i1, ptn + rn * i_n) for i1, i_n in pairs]


def midpoint_probe(
    j_obs: Fim,
    grid: TimeGrid,
    alpha_theta: float,
    x_t_hat: TargetState,
    i1_resolved: np.ndarray,
    v_t_hat: np.ndarray,
) -> np.ndarray:
    """중간 시각 t_m 의 플랫폼 위치 탐침 p̃_m = p̂_T(t_m) + r̃_m ĩ_m

    ĩ_m 은 J12 의 최소 고유값 방향이며, u 에 대한 부호를 î_1 과 맞춥니다.
    """
    tr12 = j_obs.m[0, 2] + j_obs.m[1, 3]
    if tr12 <= 0:
        raise InvalidFimError("J12 블록의 대각합이 양수가 아닙니다")
    a = grid.alpha
    r_m = math.sqrt(alpha_theta * float(np.sum(a * (1.0 - a))) / tr12)
    _, _, _, i_m = symmetric_eig2(j_obs.j12)

    u = cross_track_unit(v_t_hat)
    if float(i_m @ u) * float(np.asarray(i1_resolved) @ u) < 0:
        i_m = -i_m
    m = grid.midpoint_index()
    return target_position(x_t_hat, grid, m) + r_m * i_m


def _position_at(p1: np.ndarray, rho: np.ndarray, pn: np.ndarray, grid: TimeGrid, i: int) -> np.ndarray:
    t = grid.t[i - 1]
    if t < grid.tk:
        return p1 + (t - grid.t1) / (grid.tk - grid.t1) * (rho - p1)
    return rho + (t - grid.tk) / (grid.tn - grid.tk) * (pn - rho)


def turn_guess(p1_hat: np.ndarray, pn_hat: np.ndarray, grid: TimeGrid, probe: np.ndarray) -> Waypoints:
    """현 p̂_1 → p̂_n 위에 세운 두 등속 선회점 중 t_m 에서 탐침에 더 가까운 쪽"""
    p1_hat, pn_hat = np.asarray(p1_hat, dtype=float), np.asarray(pn_hat, dtype=float)
    chord = pn_hat - p1_hat
    d = float(np.hypot(*chord))
    if d == 0.0:
        raise GeometryError("끝점 추정이 일치하여 현의 방향이 없습니다")

    nu = math.atan((grid.tk - grid.t1) / (grid.tn - grid.tk))
    leg1 = d * math.sin(nu)
    base = math.atan2(chord[0], chord[1])
    m = grid.midpoint_index()

    best: Optional[tuple[float, np.ndarray]] = None
    for ell in (-1, 1):
        rho = p1_hat + leg1 * heading_vector(base + ell * (0.5 * math.pi - nu))
        miss = float(np.hypot(*(_position_at(p1_hat, rho, pn_hat, grid, m) - probe)))
        if best is None or miss < best[0]:
            best = (miss, rho)

    return Waypoints(
        p1=tuple(p1_hat.tolist()), pk=tuple(best[1].tolist()), pn=tuple(pn_hat.tolist())
    )


# ──────────────────────────────────────────────
# 영역별 초기 추정
# ──────────────────────────────────────────────

class _GuessContext:
    """α 와 무관한 부분 (FIM 행렬, 표적 속도, 방향쌍) 을 한 번만 계산"""

    def __init__(self, obs: ObservedProducts):
        self.obs = obs
        self.j_obs = unpack9(obs.j_obs)
        self.v_t = obs.x_t_hat.velocity(obs.grid)
        i1, i_n = bearing_axes(self.j_obs)
        self.pairs = admissible_pairs(i1, i_n, self.v_t)

    def candidate(self, alpha_theta: float, g: int) -> tuple[Waypoints, float, float, np.ndarray]:
        """(경유점, r̂_1, r̂_n, 현 벡터)"""
        grid, x_t_hat = self.obs.grid, self.obs.x_t_hat
        r1, rn = range_estimates(self.j_obs, grid, alpha_theta)
        pair = self.pairs[g - 1]
        p1, pn = endpoint_guesses(x_t_hat, r1, rn, [pair])[0]
        probe = midpoint_probe(self.j_obs, grid, alpha_theta, x_t_hat, pair[0], self.v_t)
        return turn_guess(p1, pn, grid, probe), r1, rn, pn - p1


def guess_for_alpha(obs: ObservedProducts, alpha_theta: float, pair_index: int) -> Waypoints:
    """단일 (α_θ, g) 에 대한 전체 추정 파이프라인: 거리 → 끝점 → 탐침 → 선회점"""
    if pair_index not in (1, 2):
        raise ValueError(f"방향쌍 인덱스는 1 또는 2 입니다 ({pair_index})")
    return _GuessContext(obs).candidate(alpha_theta, pair_index)[0]


def _split_point(candidates: list[CandidateGuess]) -> Optional[tuple[int, int]]:
    for g in (1, 2):
        seq = sorted((c for c in candidates if c.g == g), key=lambda c: c.m)
        for prev, nxt in zip(seq, seq[1:]):
            if (prev.chord_heading >= 0) != (nxt.chord_heading >= 0):
                return g, prev.m
    return None


def _best(cands: list[CandidateGuess]) -> Optional[CandidateGuess]:
    if not cands:
        return None
    return max(cands, key=lambda c: (c.g_value, -c.m, -c.g))


def zone_guesses(obs: ObservedProducts, bounds: AlphaBounds, n_theta: int) -> GuessSet:
    """영역 a/b/c 별 최대 G 초기 추정 (방향쌍 × α 격자 전수 평가)"""
    if n_theta < 3:
        raise ValueError(f"α 격자 크기는 3 이상이어야 합니다 (N={n_theta})")
    if n_theta < n_theta_min(bounds):
        logger.warning(f"[Guess] 격자 크기 {n_theta} 가 권장 최소값 {n_theta_min(bounds)} 보다 작습니다")

    grid = obs.grid
    ctx = _GuessContext(obs)
    objective = ReducedObjective(obs)
    alphas = alpha_grid(bounds, n_theta)

    candidates: list[CandidateGuess] = []
    for m, alpha in enumerate(alphas, start=1):
        for g in (1, 2):
            try:
                wp, r1, rn, chord = ctx.candidate(float(alpha), g)
                state = state_from_waypoints(wp, grid)
            except InverseTmaError as e:
                logger.warning(f"[Guess] 후보 (m={m}, g={g}) 생성 실패: {e}")
                continue
            g_value = objective(state.as_vector())
            if not math.isfinite(g_value):
                logger.warning(f"[Guess] 후보 (m={m}, g={g}) 에서 G 가 유한하지 않습니다")
                continue
            candidates.append(CandidateGuess(
                m=m,
                g=g,
                alpha_theta=float(alpha),
                waypoints=wp,
                g_value=g_value,
                r1_hat=r1,
                rn_hat=rn,
                chord_heading=math.atan2(chord[0], chord[1]),
            ))

    if not candidates:
        raise IdentificationError("유효한 초기 추정 후보가 없습니다")

    split = _split_point(candidates)
    by_g = {g: [c for c in candidates if c.g == g] for g in (1, 2)}
    if split is None:
        logger.warning("[Guess] 현 방향각의 부호 전환이 없어 영역 c 를 비워 둡니다")
        groups = {"a": by_g[1], "b": by_g[2], "c": []}
    else:
        g_star, m_star = split
        head = [c for c in by_g[g_star] if c.m <= m_star]
        tail = [c for c in by_g[g_star] if c.m > m_star]
        other = by_g[3 - g_star]
        groups = {"a": head, "b": other, "c": tail} if g_star == 1 else {"a": other, "b": head, "c": tail}

    zones = []
    for label, cands in groups.items():
        best = _best(cands)
        if best is None:
            continue
        zones.append(ZoneGuess(label=label, candidate=best))
        logger.info(
            f"[Guess] 영역 {label}: m={best.m}, g={best.g}, α={best.alpha_theta:.4g}, G={best.g_value:.6e}"
        )

    return GuessSet(zones=zones, candidates=candidates, alpha_grid=tuple(alphas.tolist()), split=split)
