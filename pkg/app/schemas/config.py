"""
실험 설정 스키마

YAML 설정 파일 한 개가 ExperimentConfig 한 개에 대응합니다. 모르는 키는 거부합니다.
"""

from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

CHECKS = ("rf", "commutators", "kappa", "mourre", "ccr", "weyl", "spectral-derivative", "sojourn")

CheckName = Literal["rf", "commutators", "kappa", "mourre", "ccr", "weyl", "spectral-derivative", "sojourn"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Section):
    """모델 선택"""

    id: str = Field(..., description="카탈로그 model_id", examples=["convolution_zd"])
    params: Dict[str, Any] = Field(default_factory=dict, description="빌더 파라미터", examples=[{"box": 512}])


class ProfileSection(_Section):
    """국소화 함수 f"""

    kind: Literal["radial_plateau", "product_plateau", "indicator_ball"] = Field("radial_plateau")
    plateau_radius: float = Field(1.0, gt=0)
    decay_scale: float = Field(1.0, gt=0)
    smooth_order: Optional[int] = Field(None, ge=3, description="None 이면 settings.SMOOTH_ORDER")
    decay_exponent: float = Field(2.0, gt=0)


class StateSection(_Section):
    """seed 상태"""

    kind: Literal["gaussian", "basis", "file"] = "gaussian"
    center: Union[float, List[float]] = Field(0.0, description="가우스 묶음 중심")
    width: float = Field(4.0, gt=0)
    momentum: Union[float, List[float]] = 0.0
    mode: Optional[int] = Field(None, ge=0, description="도파관 횡방향 모드")
    index: Optional[int] = Field(None, ge=0, description="basis 상태 인덱스")
    path: Optional[str] = Field(None, description="file 상태 (.npy) 경로")
    weight_power: float = Field(2.0, gt=0, description="‖⟨Φ⟩^t φ‖ 의 t")

    @model_validator(mode="after")
    def _kind_fields(self) -> "StateSection":
        if self.kind == "basis" and self.index is None:
            raise ValueError("state.kind=basis needs state.index")
        if self.kind == "file" and not self.path:
            raise ValueError("state.kind=file needs state.path")
        return self


class FilterSection(_Section):
    """스펙트럴 필터 η"""

    center: float
    half_width: float = Field(..., gt=0)
    margin: float = Field(..., gt=0)
    order: Optional[int] = Field(None, ge=3)


class MourreWindow(_Section):
    center: float
    delta: float = Field(..., gt=0)


class RunSection(_Section):
    """실행할 검사와 수치 파라미터"""

    checks: List[CheckName] = Field(default_factory=lambda: ["rf"])
    r_list: List[float] = Field(default_factory=lambda: [10.0, 20.0, 40.0, 80.0])
    t_grid: List[float] = Field(default_factory=lambda: [0.0, 2.5, 5.0, 7.5, 10.0])
    tolerances: Dict[str, float] = Field(default_factory=dict, description="검사 이름 → 허용 오차")
    seed: Optional[int] = Field(None, description="None 이면 settings.DEFAULT_SEED")
    depth: int = Field(2, ge=1, le=3, description="교환자 사슬 깊이")
    kappa_delta: Optional[float] = Field(None, gt=0)
    kappa_threshold: Optional[float] = Field(None, gt=0)
    mourre_windows: List[MourreWindow] = Field(default_factory=list, description="비우면 자동 선택")
    extra_states: int = Field(1, ge=0, description="CCR/Weyl 에 더할 무작위 필터 상태 수")
    tail_tol: Optional[float] = Field(None, gt=0)
    rf_points: int = Field(100, ge=4)

    @field_validator("r_list")
    @classmethod
    def _ascending(cls, value: List[float]) -> List[float]:
        if any(r <= 0 for r in value):
            raise ValueError("r_list entries must be > 0")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError(f"r_list must be strictly ascending, got {value}")
        return value

    @field_validator("tolerances")
    @classmethod
    def _positive(cls, value: Dict[str, float]) -> Dict[str, float]:
        bad = {k: v for k, v in value.items() if not v > 0}
        if bad:
            raise ValueError(f"tolerances must be > 0: {bad}")
        return value

    @field_validator("checks")
    @classmethod
    def _unique(cls, value: List[str]) -> List[str]:
        return list(dict.fromkeys(value))


class OutputSection(_Section):
    directory: Optional[str] = Field(None, description="None 이면 settings.OUTPUT_DIR")
    formats: Literal["json", "csv", "both"] = "both"
    dump_matrices: bool = False
    matrix_format: Literal["bin", "csv"] = "bin"


class ExperimentConfig(_Section):
    """
    실험 설정

    filter 는 ccr, weyl, spectral-derivative, sojourn 검사에 필요합니다.
    """

    model: ModelSection
    profile: ProfileSection = Field(default_factory=ProfileSection)
    state: StateSection = Field(default_factory=StateSection)
    filter: Optional[FilterSection] = None
    run: RunSection = Field(default_factory=RunSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _filter_required(self) -> "ExperimentConfig":
        needs = {"ccr", "weyl", "spectral-derivative", "sojourn"} & set(self.run.checks)
        if needs and self.filter is None:
            raise ValueError(f"checks {sorted(needs)} need a filter section")
        if "sojourn" in self.run.checks and len(self.run.r_list) < 4:
            raise ValueError("sojourn needs at least 4 r values")
        return self

    def tolerance(self, name: str, default: float) -> float:
        return float(self.run.tolerances.get(name, default))
