"""역 TMA 라이브러리 예외 계층

모든 예외는 InverseTmaError를 상속합니다. 인덱스/값 오류 성격의 예외는
표준 IndexError/ValueError도 함께 상속하므로 호출 측에서 어느 쪽으로든 잡을 수 있습니다.
"""

from typing import Optional


class InverseTmaError(Exception):
    """라이브러리 공통 기반 예외"""


class SampleIndexError(InverseTmaError, IndexError):
    """샘플 인덱스 i가 [1, n] 범위를 벗어남"""


class GeometryError(InverseTmaError, ValueError):
    """기하 퇴화: 표적과 플랫폼 위치 일치, 영벡터 방향, 0 길이 현(chord) 등"""


class ConstraintViolationError(InverseTmaError, ValueError):
    """등속 제약(‖v1‖ = ‖v2‖) 또는 양의 속력 조건 위반"""


class InvalidFimError(InverseTmaError, ValueError):
    """FIM이 대칭/양반정치가 아니거나 블록 구조(J23 = J14)가 깨짐"""


class UnobservableGeometryError(InverseTmaError):
    """관측 FIM이 특이(singular)에 가까워 공분산 블록을 계산할 수 없음"""


class AmbiguousAxisError(InverseTmaError):
    """2×2 대칭 행렬의 고유값이 중복되어 주축 방향이 정의되지 않음"""


class ObjectiveEvaluationError(InverseTmaError):
    """최적화 시작점 또는 초기 심플렉스에서 목적함수 값이 유한하지 않음"""


class IdentificationError(InverseTmaError):
    """모든 탐색 영역(zone)에서 식별이 실패함

    causes: 영역 라벨 → 실패 원인 메시지
    """

    def __init__(self, message: str, causes: Optional[dict[str, str]] = None):
        super().__init__(message)
        self.causes: dict[str, str] = dict(causes or {})

    def __str__(self) -> str:
        base = super().__str__()
        if not self.causes:
            return base
        detail = ", ".join(f"{zone}: {cause}" for zone, cause in sorted(self.causes.items()))
        return f"{base} ({detail})"


class ConfigError(InverseTmaError, ValueError):
    """시나리오 설정 파일 파싱/검증 실패: 문제 필드와 줄 번호를 함께 보고"""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.field = field
        self.line = line

    def __str__(self) -> str:
        base = super().__str__()
        where = []
        if self.field:
            where.append(f"필드 '{self.field}'")
        if self.line is not None:
            where.append(f"{self.line}번째 줄")
        return f"{base} [{', '.join(where)}]" if where else base
