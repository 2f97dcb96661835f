"""inversetma 명령행 진입점

사용 예:
  python -m inversetma.main synth --config inversetma/scenarios/scenario_i.cfg --out out/i
  python -m inversetma.main identify --config inversetma/scenarios/scenario_i.cfg --intercepted out/i --out out/i
  python -m inversetma.main sensitivity --config inversetma/scenarios/scenario_i.cfg --intercepted out/i --k-sweep 11:191:10
  python -m inversetma.main demo --out out/demo --parallel 3

종료 코드: 0 성공, 1 설정/검증 오류, 2 식별 실패
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from inversetma.config import settings
from inversetma.errors import ConfigError, IdentificationError, InverseTmaError
from inversetma.models.scenario import ScenarioConfig
from inversetma.services import scenario_service
from inversetma.utils import parse_index_range

logger = logging.getLogger("inversetma")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IDENTIFICATION = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inversetma",
        description="도청한 표적 추정 산출물(x̂_T, J^obs)로 2구간 등속 플랫폼 궤적을 식별합니다.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, needs_config: bool = True) -> None:
        if needs_config:
            p.add_argument("--config", type=Path, required=True, help="시나리오 설정 파일")
        p.add_argument("--out", type=Path, default=None, help="출력 디렉터리")
        p.add_argument("--parallel", type=int, default=None, metavar="N", help="영역/k 병렬 작업 수")

    common(sub.add_parser("synth", help="참 궤적으로 도청 산출물(J^obs, x̂_T) 합성"))

    p_identify = sub.add_parser("identify", help="도청 산출물로 플랫폼 궤적 식별")
    common(p_identify)
    p_identify.add_argument("--intercepted", type=Path, default=None, help="synth 출력 디렉터리 (기본: --out)")

    p_sweep = sub.add_parser("sensitivity", help="선회 인덱스 후보별 식별 (RSPE vs k)")
    common(p_sweep)
    p_sweep.add_argument("--intercepted", type=Path, default=None, help="synth 출력 디렉터리 (기본: --out)")
    p_sweep.add_argument("--k-sweep", default=None, metavar="LO:HI[:STEP]", help="k 후보 구간 (기본: 설정값)")

    common(sub.add_parser("demo", help="내장 시나리오 (i), (ii) 전체 실행"), needs_config=False)
    return parser


def _out_dir(args: argparse.Namespace, cfg: Optional[ScenarioConfig] = None) -> Path:
    if args.out is not None:
        return args.out
    if cfg is not None and cfg.output.dir:
        return Path(cfg.output.dir)
    return Path(settings.OUTPUT_DIR)


def _k_candidates(text: Optional[str], cfg: ScenarioConfig) -> list[int]:
    if text is None:
        return cfg.eavesdropper.k_candidates()
    try:
        lo, hi, step = parse_index_range(text)
    except ValueError as e:
        raise ConfigError(str(e), field="--k-sweep") from e
    return list(range(lo, hi + 1, step))


def run(args: argparse.Namespace) -> int:
    workers = args.parallel
    if workers is not None and workers < 1:
        raise ConfigError("--parallel 은 1 이상이어야 합니다", field="--parallel")

    if args.command == "demo":
        results = scenario_service.run_demo(_out_dir(args), workers)
        for name, result in results.items():
            rspe = f"{result.rspe:.4g} m" if result.rspe is not None else "-"
            logger.info(f"[Identify] {name}: 영역 {result.winning_zone}, α̂_θ={result.alpha_theta_hat:.6g}, RSPE={rspe}")
        return EXIT_OK

    cfg = scenario_service.load_config(args.config)
    out = _out_dir(args, cfg)

    if args.command == "synth":
        scenario_service.run_synth(cfg, out)
    elif args.command == "identify":
        scenario_service.run_identify(cfg, args.intercepted or out, out, workers)
    elif args.command == "sensitivity":
        ks = _k_candidates(args.k_sweep, cfg)
        scenario_service.run_sensitivity(cfg, args.intercepted or out, out, ks, workers)
    return EXIT_OK


def main(argv: list[str]) -> int:
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except IdentificationError as e:
        logger.error(f"[Identify] 식별 실패: {e}")
        return EXIT_IDENTIFICATION
    except (ConfigError, ValidationError) as e:
        logger.error(f"[Config] {e}")
        return EXIT_INVALID
    except (InverseTmaError, ValueError, OSError) as e:
        logger.error(f"[{args.command}] {type(e).__name__}: {e}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
