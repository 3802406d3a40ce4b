"""
r → ∞ 외삽 (I_r = I_∞ + c·r^{-p})
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import curve_fit

from app.core.exceptions import FitIllConditioned

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PowerFit:
    limit: float
    amplitude: float
    exponent: Optional[float]  # 데이터가 평탄하면 None
    residual: float


def _model(r: np.ndarray, limit: float, amplitude: float, exponent: float) -> np.ndarray:
    return limit + amplitude * r ** (-exponent)


def power_law_fit(r: Sequence[float], values: Sequence[float], min_points: int = 4) -> PowerFit:
    """
    I_r = I_∞ + c·r^{-p} 최소제곱 적합 (p 초기값 1)

    Args:
        r: 오름차순 r 값
        values: 각 r 의 I_r
        min_points: 최소 점 개수

    Returns:
        PowerFit

    Raises:
        FitIllConditioned: 점이 부족하거나 적합이 수렴하지 않음
    """
    rr = np.asarray(r, dtype=float)
    yy = np.asarray(values, dtype=float)
    if rr.size < min_points or rr.size != yy.size:
        raise FitIllConditioned(detail=f"need >= {min_points} points, got {rr.size}")
    if not np.all(np.isfinite(yy)):
        raise FitIllConditioned(detail="non-finite I_r")

    spread = float(np.max(yy) - np.min(yy))
    scale = max(float(np.max(np.abs(yy))), 1e-300)
    if spread <= 1e-10 * scale:
        # 이미 수렴: 지수는 정의되지 않음
        return PowerFit(limit=float(np.mean(yy)), amplitude=0.0, exponent=None, residual=spread)

    # 초기값: p=1 에서 마지막 두 점으로 c, I_∞ 결정
    p0 = 1.0
    c0 = (yy[-2] - yy[-1]) / (rr[-2] ** -p0 - rr[-1] ** -p0)
    i0 = yy[-1] - c0 * rr[-1] ** -p0
    try:
        popt, _ = curve_fit(
            _model,
            rr,
            yy,
            p0=[i0, c0, p0],
            bounds=([-np.inf, -np.inf, 1e-3], [np.inf, np.inf, 20.0]),
            maxfev=20000,
        )
    except (RuntimeError, ValueError) as exc:
        raise FitIllConditioned(detail=str(exc)) from exc

    if not np.all(np.isfinite(popt)):
        raise FitIllConditioned(detail=f"non-finite parameters {popt}")
    residual = float(np.max(np.abs(_model(rr, *popt) - yy)))
    logger.debug("power_law_fit: I_inf=%.6g c=%.3g p=%.3f residual=%.2e", popt[0], popt[1], popt[2], residual)
    return PowerFit(limit=float(popt[0]), amplitude=float(popt[1]), exponent=float(popt[2]), residual=residual)
