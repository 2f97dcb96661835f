"""공용 유틸리티: 설정 텍스트 파싱, CSV 입출력, 수치 포맷 등 서비스 공통 헬퍼"""

import csv
import io
import logging
import math
import os
import re
import tempfile
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from inversetma.errors import ConfigError

logger = logging.getLogger(__name__)

# "3*pi/4", "-pi/2", "pi", "0.25*pi" 형태의 각도 표현
_PI_EXPR = re.compile(
    r"^\s*(?P<sign>[-+]?)\s*(?:(?P<coef>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)\s*\*\s*)?pi"
    r"\s*(?:/\s*(?P<den>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?))?\s*$"
)
_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*$")


def parse_key_value_text(text: str) -> tuple[dict[str, str], dict[str, int]]:
    """`key = value` 형식 텍스트를 (값 dict, 줄 번호 dict)로 파싱합니다.

    - `#` 이후는 주석, 빈 줄은 무시
    - 키는 `section.name` 처럼 점으로 구분된 식별자
    - 같은 키가 두 번 나오면 ConfigError
    """
    values: dict[str, str] = {}
    lines: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("'key = value' 형식이 아닙니다", line=lineno)

        key, value = (part.strip() for part in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError(f"잘못된 키 이름: {key!r}", field=key or None, line=lineno)
        if not value:
            raise ConfigError("값이 비어 있습니다", field=key, line=lineno)
        if key in values:
            raise ConfigError(
                f"중복된 키 (처음 정의: {lines[key]}번째 줄)", field=key, line=lineno
            )
        values[key] = value
        lines[key] = lineno

    return values, lines


def parse_number(value: Any) -> Any:
    """숫자 문자열 또는 `a*pi/b` 각도 표현을 float로 변환합니다.

    해석할 수 없는 값은 그대로 반환하여 pydantic 검증 단계에서 오류가 나도록 둡니다.
    """
    if not isinstance(value, str):
        return value
    match = _PI_EXPR.match(value)
    if match is None:
        return value
    coef = float(match.group("coef")) if match.group("coef") else 1.0
    den = float(match.group("den")) if match.group("den") else 1.0
    if den == 0.0:
        return value
    result = coef * math.pi / den
    return -result if match.group("sign") == "-" else result


def parse_index_range(text: str) -> tuple[int, int, int]:
    """`LO:HI` 또는 `LO:HI:STEP` 형식의 정수 구간을 파싱합니다 (양 끝 포함)."""
    parts = [p.strip() for p in str(text).split(":")]
    if len(parts) not in (2, 3) or not all(parts):
        raise ValueError(f"구간 형식은 LO:HI 또는 LO:HI:STEP 이어야 합니다: {text!r}")
    try:
        lo, hi = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
    except ValueError as e:
        raise ValueError(f"구간 값은 정수여야 합니다: {text!r}") from e
    if step <= 0 or hi < lo:
        raise ValueError(f"구간은 LO ≤ HI, STEP > 0 이어야 합니다: {text!r}")
    return lo, hi, step


def format_float(x: float) -> str:
    """CSV/설정 출력용 float 포맷: 17 유효숫자로 재로딩 시 값이 정확히 복원됩니다."""
    return f"{float(x):.17g}"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """CSV를 임시 파일에 쓴 뒤 원자적으로 교체합니다. float은 format_float로 기록."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])

    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(buffer.getvalue())
        os.replace(tmp_name, path)
    except OSError:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return path


def read_csv(path: Path, required: Optional[Sequence[str]] = None) -> list[dict[str, str]]:
    """CSV를 헤더 기준 dict 리스트로 읽습니다. 필수 컬럼이 없으면 ValueError."""
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        missing = [c for c in (required or ()) if c not in (reader.fieldnames or ())]
        if missing:
            raise ValueError(f"{path.name}: 필수 컬럼 누락 {missing}")
        return list(reader)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def normalize_angle(angle: float) -> float:
    """각도를 (−π, π] 로 정규화합니다. 이미 구간 안의 값은 그대로 반환."""
    angle = float(angle)
    if -math.pi < angle <= math.pi:
        return angle
    wrapped = angle - 2.0 * math.pi * math.ceil((angle - math.pi) / (2.0 * math.pi))
    if wrapped > math.pi:
        wrapped -= 2.0 * math.pi
    return math.pi if wrapped <= -math.pi else wrapped
