"""
커스텀 예외 클래스

수치 검증 도구 전체에서 일관된 오류 보고와 종료 코드를 위한 예외 계층을 제공합니다.

- ModelError 계열: 설정/모델/전제조건 오류 (종료 코드 1)
- CheckFailure 계열: 검증 항목이 허용 오차를 만족하지 못함 (종료 코드 2)
"""

from typing import Optional


class AppException(Exception):
    """
    애플리케이션 기본 예외 클래스

    모든 커스텀 예외의 부모 클래스입니다.
    CLI 진입점에서 exit_code 로 변환됩니다.
    """

    exit_code: int = 1
    default_message: str = "내부 오류가 발생했습니다"

    def __init__(self, message: Optional[str] = None, detail: Optional[str] = None):
        self.message = message or self.default_message
        self.detail = detail  # 추가 진단 정보 (잔차, 위반 쌍 등)
        super().__init__(self.message)

    def __str__(self) -> str:
        if self.detail:
            return f"{self.message} ({self.detail})"
        return self.message


class ModelError(AppException):
    """설정/모델/전제조건 오류 (1)"""

    exit_code = 1
    default_message = "모델 또는 설정 오류입니다"


class CheckFailure(AppException):
    """검증 실패 (2)"""

    exit_code = 2
    default_message = "검증 항목이 허용 오차를 만족하지 못했습니다"


# ========== core_linalg ==========

class NonHermitian(ModelError):
    """행렬이 에르미트가 아님"""

    default_message = "행렬이 에르미트가 아닙니다"


class NotCommuting(ModelError):
    """연산자 족이 가환이 아님"""

    default_message = "연산자들이 서로 가환하지 않습니다"


class DegeneracyUnresolved(CheckFailure):
    """축퇴 클러스터 정제 실패"""

    default_message = "축퇴 고유공간을 분해하지 못했습니다"


class DomainError(ModelError):
    """함수값이 유한하지 않음"""

    default_message = "함수가 고유값에서 유한하지 않습니다"


# ========== localisation ==========

class SingularAtOrigin(ModelError):
    """원점에서 R_f 평가"""

    default_message = "R_f 는 원점에서 정의되지 않습니다"


class NonDifferentiable(ModelError):
    """미분 불가능한 프로파일"""

    default_message = "미분 불가능한 국소화 함수입니다"


class ProfileNotEven(ModelError):
    """짝함수가 아닌 프로파일"""

    default_message = "국소화 함수가 짝함수가 아닙니다"


# ========== models ==========

class BadDimension(ModelError):
    """차원/격자 크기 오류"""

    default_message = "잘못된 차원입니다"


class AsymmetricMeasure(ModelError):
    """μ(g) ≠ conj(μ(-g))"""

    default_message = "합성곱 계수가 대칭이 아닙니다"


class SupportTooLargeForBox(ModelError):
    """계수 지지집합이 상자에 비해 큼"""

    default_message = "계수의 지지집합이 상자에 비해 너무 큽니다"


class ZeroVelocity(ModelError):
    """Friedrichs 모델의 v = 0"""

    default_message = "속도 v 는 0 이 아니어야 합니다"


class NonFiniteSymbol(ModelError):
    """심볼 값이 유한하지 않음"""

    default_message = "심볼이 운동량 격자에서 유한하지 않습니다"


class NotAdmissible(ModelError):
    """허용 그래프 조건 위반"""

    default_message = "그래프가 허용 조건을 만족하지 않습니다"


class UnsupportedModel(ModelError):
    """지원하지 않는 모델"""

    default_message = "이 검사를 지원하지 않는 모델입니다"


# ========== spectral / mourre / time operator ==========

class NotJointlyDiagonalized(ModelError):
    """필요한 연산자가 동시 대각화 데이터에 없음"""

    default_message = "H 와 H' 가 동시 대각화되어 있지 않습니다"


class FilterHitsKappa(ModelError):
    """필터가 임계 집합과 겹침"""

    default_message = "필터가 임계 집합 κ(H) 에 닿습니다"


class FilteredToZero(ModelError):
    """필터링 결과가 0"""

    default_message = "필터가 초기 상태를 소멸시켰습니다"


class NotReduced(ModelError):
    """분해가 연산자를 환원하지 않음"""

    default_message = "분해가 연산자를 환원하지 않습니다"


class EmptyWindow(ModelError):
    """스펙트럼 창이 비어 있음"""

    default_message = "창 안에 H 의 고유값이 없습니다"


class StateNotFiltered(ModelError):
    """상태가 (H')² 핵 영역에 닿음"""

    default_message = "상태가 필터링되지 않았습니다"


class SingularCalculus(ModelError):
    """H' 고유값이 0 에 너무 가까움"""

    default_message = "필터 범위에 H' 의 0 고유값이 남아 있습니다"


# ========== sojourn ==========

class TailNotDecaying(CheckFailure):
    """적분 피적분함수가 감쇠하지 않음"""

    default_message = "체류 시간 피적분함수가 감쇠하지 않습니다"


class FitIllConditioned(CheckFailure):
    """외삽 적합 실패"""

    default_message = "r→∞ 외삽 적합이 불안정합니다"


# ========== cli ==========

class ConfigError(ModelError):
    """실험 설정 오류"""

    default_message = "실험 설정이 올바르지 않습니다"


class UnknownPreset(ModelError):
    """알 수 없는 프리셋"""

    default_message = "알 수 없는 프리셋입니다"
