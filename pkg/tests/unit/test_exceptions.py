"""
커스텀 예외 클래스 테스트
"""

import pytest

from app.core.exceptions import (
    AppException,
    BadDimension,
    CheckFailure,
    ConfigError,
    DegeneracyUnresolved,
    FitIllConditioned,
    ModelError,
    NonHermitian,
    StateNotFiltered,
    TailNotDecaying,
    UnknownPreset,
)


class TestAppException:
    """AppException 기본 클래스 테스트"""

    def test_default_message(self):
        exc = AppException()
        assert exc.message == "내부 오류가 발생했습니다"
        assert exc.exit_code == 1

    def test_custom_message(self):
        exc = AppException(message="커스텀 에러 메시지")
        assert exc.message == "커스텀 에러 메시지"

    def test_detail_for_debugging(self):
        exc = AppException(message="에러", detail="residual 1e-3")
        assert exc.detail == "residual 1e-3"
        assert str(exc) == "에러 (residual 1e-3)"

    def test_str_without_detail(self):
        assert str(AppException("에러")) == "에러"


class TestExitCodes:
    """종료 코드 매핑 테스트"""

    @pytest.mark.parametrize("cls", [NonHermitian, BadDimension, StateNotFiltered, ConfigError, UnknownPreset])
    def test_model_errors_exit_1(self, cls):
        exc = cls()
        assert isinstance(exc, ModelError)
        assert exc.exit_code == 1

    @pytest.mark.parametrize("cls", [DegeneracyUnresolved, TailNotDecaying, FitIllConditioned])
    def test_check_failures_exit_2(self, cls):
        exc = cls()
        assert isinstance(exc, CheckFailure)
        assert exc.exit_code == 2

    def test_subclass_default_message(self):
        assert UnknownPreset().message == "알 수 없는 프리셋입니다"

    def test_catch_as_app_exception(self):
        with pytest.raises(AppException):
            raise ConfigError(detail="run.r_list")
