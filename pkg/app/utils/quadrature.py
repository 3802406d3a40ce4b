"""
구적 / 수치 미분 헬퍼
"""

from __future__ import annotations

from typing import Callable, Tuple

import numpy as np
from scipy import integrate


def central_difference(fn: Callable[[float], np.ndarray], h: float) -> np.ndarray:
    return (np.asarray(fn(h)) - np.asarray(fn(-h))) / (2.0 * h)


def richardson_central_difference(fn: Callable[[float], np.ndarray], h: float) -> np.ndarray:
    """
    Richardson 1회 보정한 중심 차분

    D(h) 가 O(h²) 오차를 가지므로 (4·D(h/2) - D(h)) / 3 은 O(h⁴).

    Args:
        fn: 스칼라 s 를 받아 배열을 반환하는 함수 (s=0 이 미분 지점)
        h: 기본 스텝
    """
    coarse = central_difference(fn, h)
    fine = central_difference(fn, 0.5 * h)
    return (4.0 * fine - coarse) / 3.0


def simpson_with_error(values: np.ndarray, dt: float) -> Tuple[float, float]:
    """
    균일 격자 Simpson 적분과 절반 해상도 비교 오차

    Args:
        values: 균일 간격 표본 (홀수 개 권장)
        dt: 표본 간격

    Returns:
        (적분값, |I_h - I_2h| / 15 오차 추정)
    """
    y = np.asarray(values, dtype=float)
    if y.size < 2:
        return 0.0, 0.0
    full = float(integrate.simpson(y, dx=dt))
    if y.size < 5:
        return full, abs(full - float(integrate.trapezoid(y, dx=dt)))
    # 홀수 개 표본이면 절반 격자도 같은 구간을 덮음
    n = y.size if y.size % 2 == 1 else y.size - 1
    half = float(integrate.simpson(y[:n:2], dx=2.0 * dt))
    same_span = float(integrate.simpson(y[:n], dx=dt))
    return full, abs(same_span - half) / 15.0
