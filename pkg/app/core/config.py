import os
from pathlib import Path
from functools import lru_cache
from pydantic_settings import BaseSettings, SettingsConfigDict


# Resolve .env at project root regardless of current working directory
_PROJECT_ROOT_ENV = str(Path(__file__).resolve().parents[2] / ".env")


class Settings(BaseSettings):
    APP_NAME: str = "Time Operator Toolkit"
    APP_VERSION: str = "1.0.0"

    # 결과 파일 기본 출력 디렉토리 (--out 으로 덮어쓸 수 있음)
    OUTPUT_DIR: str = "results"
    LOG_LEVEL: str = "INFO"

    # 에르미트/유니터리 판정 허용 오차
    HERMITICITY_TOL: float = 1e-12
    UNITARY_TOL: float = 1e-10

    # 동시 대각화
    JOINT_TOL: float = 1e-8
    COMM_TOL: float = 1e-9
    CLUSTER_REL_GAP: float = 1e-8  # 스펙트럼 지름 대비 상대 간격
    DEFAULT_SEED: int = 0

    # 스펙트럴 필터 / 국소화 함수
    SMOOTH_ORDER: int = 5
    QUAD_EPSABS: float = 1e-10

    # κ(H) 추정 기본값: delta = 지름 * fraction, threshold = rel * ‖(H')²‖
    KAPPA_DELTA_FRACTION: float = 0.01
    KAPPA_THRESHOLD_REL: float = 1e-6

    # |H'|^{-1} 계산 시 특이값 판정
    SINGULAR_TOL: float = 1e-12

    # 체류 시간 적분
    TAIL_TOL: float = 1e-4

    # interior mask 최소 비율
    INTERIOR_FLOOR: float = 0.5

    # Mourre 창: interior 밖 질량 허용치, 양정치성 하한 (창 안 최대 ⟨μ⟩^{-4}(H')² 대비)
    MOURRE_LEAK_TOL: float = 1e-3
    MOURRE_FLOOR_REL: float = 0.05

    # pydantic-settings v2 style config
    model_config = SettingsConfigDict(
        env_file=os.getenv("ENV_FILE", _PROJECT_ROOT_ENV),
        case_sensitive=False,
        extra="ignore",  # allow unknown env vars so `.env` doesn't break startup
    )


@lru_cache()
def get_settings() -> Settings:
    return Settings()


settings = get_settings()
