"""환경변수 설정 모듈"""

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings

# 프로젝트 루트의 .env 파일 경로
ENV_PATH = Path(__file__).resolve().parent.parent / ".env"

# 패키지에 포함된 시나리오 설정 파일 디렉토리
SCENARIO_DIR = Path(__file__).resolve().parent / "scenarios"


class Settings(BaseSettings):
    # 로깅
    LOG_LEVEL: str = "INFO"

    # CLI 기본 출력 디렉토리 (--out 미지정 시)
    OUTPUT_DIR: str = "out"

    # 탐색 영역(zone)별 최적화 병렬 워커 수: 1이면 순차 실행
    PARALLEL_WORKERS: int = Field(default=1, ge=1)

    # 스텔스(속도 보존 부분공간) 판정 상대 허용오차
    STEALTH_TOLERANCE: float = Field(default=1e-9, gt=0)

    # FIM 조건수가 이 값을 넘으면 관측 불가(unobservable)로 취급
    FIM_CONDITION_LIMIT: float = Field(default=1e12, gt=1)

    model_config = {
        "env_file": str(ENV_PATH),
        "env_file_encoding": "utf-8",
        "env_prefix": "INVERSETMA_",
        "extra": "ignore",
    }


settings = Settings()
