"""Nelder–Mead 기반 플랫폼 궤적 식별

영역(zone)별 초기 추정에서 G 를 최대화하고, 최대 G 를 준 결과를 식별 결과로 채택합니다.
선회 시각을 모를 때는 후보 k 마다 전체 식별을 반복합니다 (tk_sensitivity).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, Union

import numpy as np

from inversetma.config import settings
from inversetma.errors import IdentificationError, InverseTmaError, ObjectiveEvaluationError
from inversetma.models.schemas import (
    AlphaBounds,
    ConstrainedPlatformState,
    GuessSet,
    IdentificationResult,
    NelderMeadResult,
    ObservedProducts,
    SensitivityEntry,
    SimplexParams,
    TimeGrid,
    TraceEntry,
    Waypoints,
    ZoneGuess,
    ZoneResult,
)
from inversetma.services.fim import unpack9
from inversetma.services.initguess import zone_guesses
from inversetma.services.motion import PlatformState, platform_track, state_from_waypoints, waypoint_track
from inversetma.services.objective import ReducedObjective
from inversetma.services.observability import diagnose

logger = logging.getLogger(__name__)

Trajectory = Union[PlatformState, Waypoints]

ZONE_ORDER = ("a", "b", "c")


# ──────────────────────────────────────────────
# Nelder–Mead
# ──────────────────────────────────────────────

def _default_steps(x0: np.ndarray) -> np.ndarray:
    return np.where(x0 != 0.0, 0.05 * np.abs(x0), 0.00025)


def _converged(z: np.ndarray, fz: np.ndarray, params: SimplexParams) -> bool:
    f_best, f_worst = fz[0], fz[-1]
    if not math.isfinite(f_worst):
        return False
    if f_best - f_worst <= params.f_tol * max(abs(f_best), 1e-300):
        return True
    diameter = float(np.max(np.abs(z[1:] - z[0])))
    return diameter <= params.x_tol * max(1.0, float(np.max(np.abs(z[0]))))


def nelder_mead_maximize(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    params: Optional[SimplexParams] = None,
    callback: Optional[Callable[[np.ndarray], Optional[float]]] = None,
) -> NelderMeadResult:
    """f 를 최대화합니다. 좌표는 초기 간격으로 정규화한 z 공간에서 움직입니다.

    callback(x_best) 의 반환값은 반복별 trace 의 rspe 칸에 기록됩니다.
    """
    params = params or SimplexParams()
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    steps = np.asarray(params.steps, dtype=float) if params.steps is not None else _default_steps(x0)
    if steps.shape != x0.shape:
        raise ValueError(f"steps 길이({steps.size})가 변수 개수({dim})와 다릅니다")

    def evaluate(z: np.ndarray) -> float:
        value = f(x0 + steps * z)
        return float(value) if math.isfinite(value) else -math.inf

    z = np.vstack([np.zeros(dim), np.eye(dim)])
    fz = np.array([evaluate(v) for v in z])
    if not np.all(np.isfinite(fz)):
        raise ObjectiveEvaluationError("시작점 또는 초기 심플렉스에서 목적함수가 유한하지 않습니다")

    rho, chi = params.reflection, params.expansion
    gamma, sigma = params.contraction, params.shrink
    trace: list[TraceEntry] = []
    iteration = 0
    restarts_used = 0
    restart_best: Optional[float] = None
    converged = False

    def shrink() -> None:
        for j in range(1, dim + 1):
            z[j] = z[0] + sigma * (z[j] - z[0])
            fz[j] = evaluate(z[j])

    while True:
        order = np.argsort(-fz, kind="stable")
        z, fz = z[order], fz[order]
        if not trace or trace[-1].iteration != iteration:
            x_best = x0 + steps * z[0]
            trace.append(TraceEntry(
                iteration=iteration,
                g_best=float(fz[0]),
                rspe=callback(x_best) if callback is not None else None,
            ))

        if _converged(z, fz, params):
            improved = restart_best is None or fz[0] > restart_best + params.f_tol * abs(restart_best)
            if restarts_used < params.restarts and improved and iteration < params.max_iterations:
                restart_best = float(fz[0])
                restarts_used += 1
                z = np.vstack([z[0], z[0] + np.eye(dim)])
                fz = np.concatenate([fz[:1], [evaluate(v) for v in z[1:]]])
                if np.all(np.isfinite(fz)):
                    continue
            converged = True
            break
        if iteration >= params.max_iterations:
            break

        iteration += 1
        centroid = z[:-1].mean(axis=0)
        worst = z[-1]
        zr = centroid + rho * (centroid - worst)
        fr = evaluate(zr)

        if not math.isfinite(fr):
            shrink()
        elif fr > fz[0]:
            ze = centroid + chi * (zr - centroid)
            fe = evaluate(ze)
            if fe > fr:
                z[-1], fz[-1] = ze, fe
            else:
                z[-1], fz[-1] = zr, fr
        elif fr > fz[-2]:
            z[-1], fz[-1] = zr, fr
        elif fr > fz[-1]:
            zc = centroid + gamma * (zr - centroid)
            fc = evaluate(zc)
            if fc >= fr:
                z[-1], fz[-1] = zc, fc
            else:
                shrink()
        else:
            zc = centroid + gamma * (worst - centroid)
            fc = evaluate(zc)
            if fc > fz[-1]:
                z[-1], fz[-1] = zc, fc
            else:
                shrink()

    return NelderMeadResult(
        x=x0 + steps * z[0],
        value=float(fz[0]),
        iterations=iteration,
        restarts_used=restarts_used,
        converged=converged,
        trace=trace,
    )


# ──────────────────────────────────────────────
# RSPE
# ──────────────────────────────────────────────

def _track(x: Trajectory, grid: TimeGrid) -> np.ndarray:
    if isinstance(x, Waypoints):
        return waypoint_track(x, grid)
    return platform_track(x, grid)


def _mean_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean(np.hypot(*(a - b).T)))


def rspe(candidate: Trajectory, truth: Trajectory, grid: TimeGrid) -> float:
    """(1/n) Σ ‖p̂_P(t_i) − p̆_P(t_i)‖: 시간 평균 위치 오차 (m)"""
    return _mean_distance(_track(candidate, grid), _track(truth, grid))


# ──────────────────────────────────────────────
# 식별
# ──────────────────────────────────────────────

def _zone_steps(zone: ZoneGuess) -> tuple[float, ...]:
    pos = 0.05 * max(zone.candidate.r1_hat, zone.candidate.rn_hat)
    return (pos, pos, 0.5, 0.05, 0.05)


def _run_zone(
    obs: ObservedProducts,
    zone: ZoneGuess,
    params: SimplexParams,
    truth_track: Optional[np.ndarray],
    trace_rspe: bool,
) -> ZoneResult:
    grid = obs.grid
    initial = state_from_waypoints(zone.candidate.waypoints, grid)
    objective = ReducedObjective(obs)

    callback = None
    if truth_track is not None and trace_rspe:
        def callback(x: np.ndarray) -> float:
            return _mean_distance(objective.track(x), truth_track)

    run_params = params if params.steps is not None else params.model_copy(update={"steps": _zone_steps(zone)})
    try:
        nm = nelder_mead_maximize(objective, initial.as_vector(), run_params, callback)
        state = ConstrainedPlatformState.from_vector(nm.x)
    except (InverseTmaError, ValueError) as e:
        logger.warning(f"[NM] 영역 {zone.label} 최적화 실패: {e}")
        return ZoneResult(label=zone.label, initial=initial, error=str(e))

    final_rspe = _mean_distance(platform_track(state, grid), truth_track) if truth_track is not None else None
    logger.info(
        f"[NM] 영역 {zone.label}: G={nm.value:.9e}, 반복 {nm.iterations}회, 재시작 {nm.restarts_used}회"
        + (f", RSPE={final_rspe:.4g} m" if final_rspe is not None else "")
    )
    return ZoneResult(
        label=zone.label,
        initial=initial,
        state=state,
        g_value=nm.value,
        iterations=nm.iterations,
        rspe=final_rspe,
        trace=nm.trace,
    )


def _map(fn: Callable, items: list, workers: int) -> list:
    """workers > 1 이면 스레드 풀에서 실행: 결과 순서는 입력 순서와 같음"""
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def identify(
    obs: ObservedProducts,
    guesses: GuessSet,
    params: Optional[SimplexParams] = None,
    *,
    truth: Optional[PlatformState] = None,
    truth_grid: Optional[TimeGrid] = None,
    workers: Optional[int] = None,
    trace_rspe: bool = True,
) -> IdentificationResult:
    """영역별 G 최대화 후 최대 G 결과를 채택하고 α̂_θ 를 계산합니다.

    truth 를 주면 영역별 RSPE 와 반복별 RSPE trace 를 함께 기록합니다.
    truth_grid 는 참 궤적의 선회 인덱스가 obs.grid 와 다를 때 사용합니다.
    """
    if not guesses.zones:
        raise ValueError("초기 추정 영역이 비어 있습니다")
    params = params or SimplexParams()
    workers = workers or settings.PARALLEL_WORKERS
    truth_track = platform_track(truth, truth_grid or obs.grid) if truth is not None else None

    results = _map(lambda z: _run_zone(obs, z, params, truth_track, trace_rspe), guesses.zones, workers)
    finished = [r for r in results if r.state is not None]
    if not finished:
        raise IdentificationError(
            "모든 영역에서 식별에 실패했습니다", causes={r.label: r.error or "" for r in results}
        )

    winner = max(finished, key=lambda r: (r.g_value, -ZONE_ORDER.index(r.label)))
    objective = ReducedObjective(obs)
    vec = winner.state.as_vector()
    bound = objective.upper_bound
    if winner.g_value > bound * (1.0 + 1e-9):
        logger.warning(f"[Identify] G 가 상한을 넘었습니다 (G={winner.g_value:.9e}, 상한={bound:.9e})")

    alpha_hat = objective.alpha_theta_ls(vec)
    if alpha_hat <= 0:
        logger.warning(f"[Identify] α̂_θ 가 양수가 아닙니다 ({alpha_hat:.6g})")
    f_ratio = objective.residual_sq(vec, alpha_hat) / bound

    j_obs = unpack9(obs.j_obs)
    report = diagnose(
        winner.state, obs.x_t_hat.velocity(obs.grid), j_obs=j_obs, x_t_hat=obs.x_t_hat, grid=obs.grid
    )
    if report.fim_condition > settings.FIM_CONDITION_LIMIT:
        logger.warning(f"[Identify] 관측 FIM 조건수가 큽니다 ({report.fim_condition:.3e})")

    logger.info(
        f"[Identify] 채택 영역 {winner.label}: G={winner.g_value:.9e}, α̂_θ={alpha_hat:.6g}, "
        f"F 잔차비={f_ratio:.3e}"
    )
    return IdentificationResult(
        state=winner.state,
        alpha_theta_hat=alpha_hat,
        g_best=winner.g_value,
        g_upper_bound=bound,
        f_residual_ratio=f_ratio,
        winning_zone=winner.label,
        zones=results,
        rspe=winner.rspe,
        observability=report,
    )


def tk_sensitivity(
    obs: ObservedProducts,
    k_candidates: Iterable[int],
    params: Optional[SimplexParams] = None,
    *,
    bounds: AlphaBounds,
    n_theta: int,
    truth: Optional[PlatformState] = None,
    truth_grid: Optional[TimeGrid] = None,
    workers: Optional[int] = None,
) -> list[SensitivityEntry]:
    """선회 인덱스 후보별 전체 식별: RSPE 는 영역 최소값, 결과는 k 오름차순"""
    params = params or SimplexParams()
    workers = workers or settings.PARALLEL_WORKERS
    truth_grid = truth_grid or obs.grid

    def run(k: int) -> SensitivityEntry:
        try:
            obs_k = obs.with_turn(k)
            guesses = zone_guesses(obs_k, bounds, n_theta)
            result = identify(
                obs_k, guesses, params, truth=truth, truth_grid=truth_grid, workers=1, trace_rspe=False
            )
        except (InverseTmaError, ValueError) as e:
            logger.warning(f"[Sweep] k={k} 실패: {e}")
            return SensitivityEntry(k=k, error=str(e))

        zone_rspe = [z.rspe for z in result.zones if z.rspe is not None]
        best_rspe = min(zone_rspe) if zone_rspe else None
        logger.info(
            f"[Sweep] k={k}: G={result.g_best:.9e}"
            + (f", RSPE={best_rspe:.4g} m" if best_rspe is not None else "")
        )
        return SensitivityEntry(k=k, rspe=best_rspe, g_best=result.g_best)

    return _map(run, sorted(set(int(k) for k in k_candidates)), workers)
