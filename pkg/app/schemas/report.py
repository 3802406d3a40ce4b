"""
검증 리포트 스키마

각 검사 결과(CheckRecord)와 수렴표, κ 추정을 모아 report.json 으로 직렬화합니다.
"""

import math
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field


def _plain(value: Any) -> Any:
    """numpy 스칼라/배열을 JSON 직렬화 가능한 값으로"""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


class CheckRecord(BaseModel):
    """검사 항목 하나의 결과"""

    name: str = Field(..., description="검사 이름", examples=["commutator_chain.interior"])
    anchor: str = Field(..., description="검사하는 항등식", examples=["H' = i[H, Phi]"])
    residual: float = Field(..., description="측정 잔차")
    tolerance: float = Field(..., description="허용 오차")
    passed: bool = Field(..., description="통과 여부")
    # 의도된 실패 (예: κ 점을 중심으로 한 Mourre 창)
    expected_failure: bool = Field(False, description="실패가 기대되는 검사")
    details: Dict[str, Any] = Field(default_factory=dict, description="진단 정보")

    @classmethod
    def evaluate(
        cls,
        name: str,
        anchor: str,
        residual: float,
        tolerance: float,
        *,
        expected_failure: bool = False,
        **details: Any,
    ) -> "CheckRecord":
        """residual ≤ tolerance 로 통과 여부를 정해 생성 (NaN 은 실패)"""
        ok = math.isfinite(residual) and residual <= tolerance
        return cls(
            name=name,
            anchor=anchor,
            residual=float(residual),
            tolerance=float(tolerance),
            passed=(not ok) if expected_failure else ok,
            expected_failure=expected_failure,
            details=_plain(details),
        )


class ConvergenceRow(BaseModel):
    r: float
    I_r: float
    t_max: float
    tail: float
    err: float
    converged: bool = True


class ConvergenceTableModel(BaseModel):
    """r 스윕 결과와 외삽"""

    label: str
    rows: List[ConvergenceRow] = Field(default_factory=list)
    extrapolated: float
    amplitude: float
    exponent: Optional[float] = None
    target: float
    relative_gap: float


class KappaPoint(BaseModel):
    lam: float
    hprime_sq_min: float


class KappaRecord(BaseModel):
    method: str
    threshold: float
    delta: float
    points: List[KappaPoint] = Field(default_factory=list)


class VerificationReport(BaseModel):
    """run 한 번의 전체 결과"""

    tool: str
    version: str
    config: Dict[str, Any] = Field(default_factory=dict, description="설정 에코")
    checks: List[CheckRecord] = Field(default_factory=list)
    tables: List[ConvergenceTableModel] = Field(default_factory=list)
    kappa: List[KappaRecord] = Field(default_factory=list)
    timing: Dict[str, float] = Field(default_factory=dict, description="단계별 소요 시간 (초)")

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed_checks(self) -> List[CheckRecord]:
        return [c for c in self.checks if not c.passed]
