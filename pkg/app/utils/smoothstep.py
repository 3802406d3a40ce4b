"""
다항식 smoothstep 유틸리티

스펙트럴 필터 η 와 국소화 함수 f 의 전이 구간에서 공통으로 사용합니다.
order m 은 다항식 차수이며, n = (m - 1) // 2 일 때 C^n 연속입니다 (m=5 → C²).
"""

from __future__ import annotations

from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.special import comb


@lru_cache(maxsize=32)
def _coefficients(order: int) -> Tuple[int, Tuple[float, ...]]:
    n = max(1, (order - 1) // 2)
    coeffs = tuple(
        float(comb(n + k, k, exact=True) * comb(2 * n + 1, n - k, exact=True) * (-1) ** k)
        for k in range(n + 1)
    )
    return n, coeffs


def smoothstep(t: np.ndarray | float, order: int = 5) -> np.ndarray:
    """
    0 → 1 전이 smoothstep

    t ≤ 0 에서 0, t ≥ 1 에서 1, 그 사이에서 양 끝 n 계 도함수가 0 인 다항식.

    Args:
        t: 입력 (배열 가능)
        order: 다항식 차수 (≥ 3)

    Returns:
        [0, 1] 범위의 값 배열
    """
    n, coeffs = _coefficients(order)
    x = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    poly = np.zeros_like(x)
    for k, c in enumerate(coeffs):
        poly = poly + c * x**k
    return x ** (n + 1) * poly


def smoothstep_derivative(t: np.ndarray | float, order: int = 5) -> np.ndarray:
    """smoothstep 의 t 에 대한 도함수 (전이 구간 밖에서는 0)"""
    n, coeffs = _coefficients(order)
    x = np.asarray(t, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    xc = np.clip(x, 0.0, 1.0)
    out = np.zeros_like(xc)
    for k, c in enumerate(coeffs):
        out = out + c * (n + 1 + k) * xc ** (n + k)
    return np.where(inside, out, 0.0)
