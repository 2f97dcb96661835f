"""시나리오 실행 서비스: 설정 로드/출력, 산출물 합성, 식별, 선회 시각 민감도

CSV 파일 형식은 docs/output-files.md 참고.
"""

import logging
import math
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np
from pydantic import ValidationError

from inversetma.config import SCENARIO_DIR, settings
from inversetma.errors import ConfigError, InvalidFimError, InverseTmaError
from inversetma.models.scenario import ScenarioConfig
from inversetma.models.schemas import (
    VEC9_NAMES,
    VEC9_SLOTS,
    Fim,
    FimVec9,
    IdentificationResult,
    ObservedProducts,
    SensitivityEntry,
    TargetState,
    TimeGrid,
)
from inversetma.services.fim import confidence_ellipse, pack9, synthesize_observed, unpack9
from inversetma.services.initguess import covariance_blocks, n_theta_known_alpha, n_theta_min, zone_guesses
from inversetma.services.motion import platform_track
from inversetma.services.optimizer import identify, rspe, tk_sensitivity
from inversetma.utils import format_float, parse_key_value_text, read_csv, write_csv

logger = logging.getLogger(__name__)

BUNDLED_SCENARIOS = ("scenario_i", "scenario_ii")
_SECTIONS = ("grid", "target", "platform", "sensor", "eavesdropper", "optimizer", "output")


# ──────────────────────────────────────────────
# 설정 파일
# ──────────────────────────────────────────────

def bundled_config(name: str) -> Path:
    path = SCENARIO_DIR / f"{name}.cfg"
    if not path.exists():
        raise ConfigError(f"내장 시나리오가 없습니다: {name}")
    return path


def _nest(values: dict[str, str], lines: dict[str, int]) -> dict[str, Any]:
    data: dict[str, Any] = {}
    for key, value in values.items():
        parts = key.split(".")
        if len(parts) == 1:
            data[key] = value
        elif len(parts) == 2 and parts[0] in _SECTIONS:
            data.setdefault(parts[0], {})[parts[1]] = value
        else:
            raise ConfigError("알 수 없는 설정 섹션입니다", field=key, line=lines.get(key))
    return data


def parse_config(text: str) -> ScenarioConfig:
    """설정 텍스트 → 검증된 ScenarioConfig. 실패 시 필드명/줄 번호를 담은 ConfigError."""
    values, lines = parse_key_value_text(text)
    try:
        return ScenarioConfig.model_validate(_nest(values, lines))
    except ValidationError as e:
        err = e.errors()[0]
        field = ".".join(str(p) for p in err["loc"]) or None
        raise ConfigError(err["msg"], field=field, line=lines.get(field or "")) from e


def load_config(path: Path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"설정 파일이 없습니다: {path}")
    cfg = parse_config(path.read_text(encoding="utf-8"))
    logger.info(f"[Config] {path.name} 로드 완료 (시나리오 '{cfg.name}')")
    return cfg


def _emit_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_config(cfg: ScenarioConfig) -> str:
    """load_config 의 역변환: parse_config(emit_config(cfg)) == cfg"""
    data = cfg.model_dump(exclude_none=True)
    out = [f"name = {_emit_value(data.pop('name'))}"]
    for section in _SECTIONS:
        fields = data.get(section)
        if not fields:
            continue
        out.append("")
        out.append(f"# {section}")
        out.extend(f"{section}.{key} = {_emit_value(value)}" for key, value in fields.items())
    return "\n".join(out) + "\n"


# ──────────────────────────────────────────────
# 산출물 합성 / 로드
# ──────────────────────────────────────────────

def synthesize(cfg: ScenarioConfig) -> tuple[ObservedProducts, Fim]:
    """설정의 참 플랫폼/센서 값으로 J^obs 를 만들어 도청 산출물로 묶습니다."""
    if cfg.platform is None:
        raise ConfigError("합성에는 참 플랫폼 상태가 필요합니다", field="platform")
    if cfg.sensor is None:
        raise ConfigError("합성에는 센서 α_θ 가 필요합니다", field="sensor")

    grid = cfg.time_grid
    x_t = cfg.target_state
    alpha = cfg.sensor.value
    bounds = cfg.eavesdropper.bounds()
    if not bounds.alpha_min <= alpha <= bounds.alpha_max:
        logger.warning(f"[Synth] 참 α_θ={alpha:.6g} 가 도청자 구간 밖입니다")
    logger.info(
        f"[Synth] {cfg.name}: α_θ 를 알 때의 격자 밀도 기준 {n_theta_known_alpha(bounds, alpha):.3f} "
        f"(설정 N_θ={cfg.eavesdropper.n_theta})"
    )

    fim = synthesize_observed(x_t, cfg.truth, grid, alpha)
    return ObservedProducts(j_obs=pack9(fim), x_t_hat=x_t, grid=grid), fim


def run_synth(cfg: ScenarioConfig, out_dir: Path) -> dict[str, Path]:
    """jobs.csv, target.csv, grid.csv, ellipses.csv 생성"""
    out_dir = Path(out_dir)
    obs, fim = synthesize(cfg)
    grid, x_t = obs.grid, obs.x_t_hat

    jobs_rows = [
        ("vec9", name, r + 1, c + 1, float(v))
        for name, (r, c), v in zip(VEC9_NAMES, VEC9_SLOTS, obs.j_obs.v)
    ]
    jobs_rows += [
        ("matrix", "", r + 1, c + 1, float(fim.m[r, c])) for r in range(4) for c in range(4)
    ]
    paths = {
        "jobs": write_csv(out_dir / "jobs.csv", ("kind", "slot", "row", "col", "value"), jobs_rows),
        "target": write_csv(
            out_dir / "target.csv", ("xi1", "eta1", "xin", "etan"), [(*x_t.p1, *x_t.pn)]
        ),
        "grid": write_csv(
            out_dir / "grid.csv",
            ("i", "t", "alpha"),
            [(i, float(t), float(a)) for i, (t, a) in enumerate(zip(grid.times, grid.alpha), start=1)],
        ),
    }

    try:
        c11, c22 = covariance_blocks(fim)
        rows = []
        for endpoint, cov in (("t1", c11), ("tn", c22)):
            e = confidence_ellipse(cov, 0.95)
            rows.append((endpoint, e.semi_major, e.semi_minor, e.orientation, e.level))
        paths["ellipses"] = write_csv(
            out_dir / "ellipses.csv",
            ("endpoint", "semi_major", "semi_minor", "orientation_rad", "level"),
            rows,
        )
    except InverseTmaError as e:
        logger.warning(f"[Synth] 신뢰 타원을 만들 수 없습니다: {e}")

    logger.info(f"[Synth] {cfg.name}: 산출물 {len(paths)}개 → {out_dir}")
    return paths


def load_intercepted(directory: Path, k: int) -> ObservedProducts:
    """run_synth 산출물(jobs/target/grid.csv)만으로 ObservedProducts 복원"""
    directory = Path(directory)
    grid_rows = read_csv(directory / "grid.csv", ("i", "t"))
    grid = TimeGrid(t=tuple(float(r["t"]) for r in sorted(grid_rows, key=lambda r: int(r["i"]))), k=k)

    (target,) = read_csv(directory / "target.csv", ("xi1", "eta1", "xin", "etan"))
    x_t = TargetState(
        p1=(float(target["xi1"]), float(target["eta1"])),
        pn=(float(target["xin"]), float(target["etan"])),
    )

    jobs = read_csv(directory / "jobs.csv", ("kind", "slot", "row", "col", "value"))
    slots = {r["slot"]: float(r["value"]) for r in jobs if r["kind"] == "vec9"}
    missing = [name for name in VEC9_NAMES if name not in slots]
    if missing:
        raise InvalidFimError(f"jobs.csv 에 성분이 없습니다: {missing}")
    j_obs = FimVec9(v=[slots[name] for name in VEC9_NAMES])

    matrix_rows = [r for r in jobs if r["kind"] == "matrix"]
    if matrix_rows:
        m = np.zeros((4, 4))
        for r in matrix_rows:
            m[int(r["row"]) - 1, int(r["col"]) - 1] = float(r["value"])
        scale = float(np.max(np.abs(m)))
        if np.max(np.abs(m - unpack9(j_obs).m)) > 1e-12 * scale:
            raise InvalidFimError("jobs.csv 의 행렬과 9-성분이 일치하지 않습니다")

    return ObservedProducts(j_obs=j_obs, x_t_hat=x_t, grid=grid)


# ──────────────────────────────────────────────
# 식별 / 민감도
# ──────────────────────────────────────────────

def _opt(value: Optional[float]) -> Optional[float]:
    return None if value is None or not math.isfinite(value) else value


def run_identify(
    cfg: ScenarioConfig,
    intercepted_dir: Path,
    out_dir: Path,
    workers: Optional[int] = None,
) -> tuple[IdentificationResult, dict[str, Path]]:
    """result.csv, zones.csv, trajectory.csv, rspe_trace.csv, guesses.csv 생성"""
    if not cfg.eavesdropper.k_known:
        logger.warning("[Config] 선회 인덱스를 모르는 설정입니다. grid.k 로 식별하며 sensitivity 실행을 권장합니다")
    obs = load_intercepted(intercepted_dir, cfg.grid.k)
    grid = obs.grid
    bounds = cfg.eavesdropper.bounds()
    n_theta = cfg.eavesdropper.n_theta
    logger.info(
        f"[Identify] {cfg.name}: α ∈ [{bounds.alpha_min:.6g}, {bounds.alpha_max:.6g}], "
        f"N_θ={n_theta} (권장 최소 {n_theta_min(bounds)})"
    )

    truth = cfg.truth
    guesses = zone_guesses(obs, bounds, n_theta)
    result = identify(
        obs, guesses, cfg.optimizer.to_params(), truth=truth, workers=workers or settings.PARALLEL_WORKERS
    )

    out_dir = Path(out_dir)
    s = result.state
    paths = {
        "result": write_csv(
            out_dir / "result.csv",
            ("zone", "xi", "eta", "s", "phi1", "phi2", "alpha_theta_hat", "g_best",
             "g_upper_bound", "f_residual_ratio", "rspe", "stealthy"),
            [(result.winning_zone, s.xi, s.eta, s.s, s.phi1, s.phi2, result.alpha_theta_hat,
              result.g_best, result.g_upper_bound, result.f_residual_ratio, result.rspe,
              result.observability.stealthy)],
        ),
        "zones": write_csv(
            out_dir / "zones.csv",
            ("zone", "g_value", "iterations", "rspe", "xi", "eta", "s", "phi1", "phi2", "error"),
            [
                (z.label, z.g_value, z.iterations, z.rspe,
                 *((z.state.xi, z.state.eta, z.state.s, z.state.phi1, z.state.phi2)
                   if z.state is not None else (None,) * 5),
                 z.error)
                for z in result.zones
            ],
        ),
        "rspe_trace": write_csv(
            out_dir / "rspe_trace.csv",
            ("zone", "iteration", "g_best", "rspe"),
            [(z.label, e.iteration, e.g_best, _opt(e.rspe)) for z in result.zones for e in z.trace],
        ),
    }

    est = platform_track(s, grid)
    true_track = platform_track(truth, grid) if truth is not None else None
    paths["trajectory"] = write_csv(
        out_dir / "trajectory.csv",
        ("t", "xi_true", "eta_true", "xi_est", "eta_est"),
        [
            (float(t),
             *((float(true_track[i, 0]), float(true_track[i, 1])) if true_track is not None else (None, None)),
             float(est[i, 0]), float(est[i, 1]))
            for i, t in enumerate(grid.times)
        ],
    )

    guess_rows = []
    for zone in guesses.zones:
        c, w = zone.candidate, zone.candidate.waypoints
        guess_rspe = rspe(w, truth, grid) if truth is not None else None
        guess_rows.append((zone.label, c.m, c.g, c.alpha_theta, c.g_value, *w.p1, *w.pk, *w.pn, guess_rspe))
    paths["guesses"] = write_csv(
        out_dir / "guesses.csv",
        ("zone", "m", "g", "alpha_theta", "g_value", "xi1", "eta1", "xik", "etak", "xin", "etan", "rspe"),
        guess_rows,
    )

    logger.info(f"[Identify] {cfg.name}: 결과 → {out_dir}")
    return result, paths


def run_sensitivity(
    cfg: ScenarioConfig,
    intercepted_dir: Path,
    out_dir: Path,
    k_candidates: Optional[Iterable[int]] = None,
    workers: Optional[int] = None,
) -> tuple[list[SensitivityEntry], dict[str, Path]]:
    """sensitivity.csv (k, rspe, g_best, error): k 오름차순"""
    ks = list(k_candidates) if k_candidates is not None else cfg.eavesdropper.k_candidates()
    if not ks:
        raise ConfigError("선회 인덱스 탐색 범위가 없습니다", field="eavesdropper.k_sweep")

    obs = load_intercepted(intercepted_dir, cfg.grid.k)
    entries = tk_sensitivity(
        obs,
        ks,
        cfg.optimizer.to_params(),
        bounds=cfg.eavesdropper.bounds(),
        n_theta=cfg.eavesdropper.n_theta,
        truth=cfg.truth,
        truth_grid=cfg.time_grid,
        workers=workers or settings.PARALLEL_WORKERS,
    )
    path = write_csv(
        Path(out_dir) / "sensitivity.csv",
        ("k", "rspe", "g_best", "error"),
        [(e.k, e.rspe, e.g_best, e.error) for e in entries],
    )
    return entries, {"sensitivity": path}


def run_demo(out_dir: Path, workers: Optional[int] = None) -> dict[str, IdentificationResult]:
    """내장 시나리오 (i), (ii) 에 대해 synth + identify 를 차례로 실행"""
    results = {}
    for name in BUNDLED_SCENARIOS:
        cfg = load_config(bundled_config(name))
        target_dir = Path(out_dir) / name
        target_dir.mkdir(parents=True, exist_ok=True)
        (target_dir / f"{name}.cfg").write_text(emit_config(cfg), encoding="utf-8")
        run_synth(cfg, target_dir)
        results[name], _ = run_identify(cfg, target_dir, target_dir, workers)
        if not cfg.eavesdropper.k_known and cfg.eavesdropper.k_sweep:
            run_sensitivity(cfg, target_dir, target_dir, workers=workers)
    return results

