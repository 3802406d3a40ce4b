"""
국소화 함수 f 와 재규격화 평균 R_f

R_f(x) = ∫_0^∞ (dμ/μ) [f(μx) - χ_[0,1](μ)]
R_f'(x) = ∫_0^∞ dμ f'(μx)   (방사형이면 -x/|x|²)

내장 프로파일:
- radial_plateau : |x| ≤ r0 에서 1, smoothstep 전이 후 가우스 꼬리
- product_plateau: 1차원 plateau 의 텐서곱 (짝함수이지만 비방사형)
- indicator_ball : 반지름 r0 공의 지시함수 (R_f 전용, 미분 불가)
- custom         : 사용자 제공 f (와 선택적 grad)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate

from app.core.config import settings
from app.core.exceptions import NonDifferentiable, ProfileNotEven, SingularAtOrigin
from app.utils.quadrature import richardson_central_difference
from app.utils.smoothstep import smoothstep, smoothstep_derivative

logger = logging.getLogger(__name__)

PROFILE_KINDS = ("radial_plateau", "product_plateau", "indicator_ball", "custom")

# u = (s - r0)/w 가 이 값을 넘으면 exp(-u²) < 1e-18
_TAIL_U = 6.5


@dataclass(frozen=True)
class LocalisationProfile:
    """국소화 함수 f 의 설정"""

    dimension: int = 1
    kind: str = "radial_plateau"
    plateau_radius: float = 1.0
    decay_scale: float = 1.0
    smooth_order: int = 5
    decay_exponent: float = 2.0  # ρ (메타데이터)
    custom_f: Optional[Callable[[np.ndarray], float]] = field(default=None, compare=False)
    custom_grad: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind '{self.kind}'")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.plateau_radius <= 0 or self.decay_scale <= 0 or self.decay_exponent <= 0:
            raise ValueError("plateau_radius, decay_scale and decay_exponent must be > 0")
        if self.smooth_order < 3:
            raise ValueError("smooth_order must be >= 3")
        if self.kind == "custom" and self.custom_f is None:
            raise ValueError("custom profile needs custom_f")

    @property
    def is_radial(self) -> bool:
        return self.kind in ("radial_plateau", "indicator_ball")

    @property
    def differentiable(self) -> bool:
        if self.kind == "indicator_ball":
            return False
        if self.kind == "custom":
            return self.custom_grad is not None
        return True

    @property
    def tail_radius(self) -> float:
        """이 반지름 밖에서 f 는 수치적으로 0"""
        if self.kind == "indicator_ball":
            return self.plateau_radius
        return self.plateau_radius + _TAIL_U * self.decay_scale


@dataclass(frozen=True)
class RfValue:
    value: float
    quadrature_error_estimate: float


# ========== 1차원 반지름 프로파일 h(s) ==========

def _h(profile: LocalisationProfile, s: np.ndarray) -> np.ndarray:
    u = (np.asarray(s, dtype=float) - profile.plateau_radius) / profile.decay_scale
    up = np.maximum(u, 0.0)
    psi = up**2 * smoothstep(up, profile.smooth_order)
    return np.where(u <= 0.0, 1.0, np.exp(-psi))


def _h_prime(profile: LocalisationProfile, s: np.ndarray) -> np.ndarray:
    u = (np.asarray(s, dtype=float) - profile.plateau_radius) / profile.decay_scale
    up = np.maximum(u, 0.0)
    order = profile.smooth_order
    psi = up**2 * smoothstep(up, order)
    dpsi = 2.0 * up * smoothstep(up, order) + up**2 * smoothstep_derivative(up, order)
    return np.where(u <= 0.0, 0.0, -dpsi / profile.decay_scale * np.exp(-psi))


def _as_points(profile: LocalisationProfile, x: np.ndarray | Sequence[float] | float) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape[-1] != profile.dimension:
        raise ValueError(f"point dimension {arr.shape[-1]} != profile dimension {profile.dimension}")
    return arr


# ========== f 와 ∇f ==========

def eval_f(profile: LocalisationProfile, x) -> float:
    """f(x)"""
    return float(eval_f_rows(profile, _as_points(profile, x)[None, :])[0])


def eval_f_rows(profile: LocalisationProfile, xs: np.ndarray) -> np.ndarray:
    """여러 점에서 f 평가 (xs: (n, d))"""
    xs = np.asarray(xs, dtype=float).reshape(-1, profile.dimension)
    if profile.kind == "radial_plateau":
        return _h(profile, np.linalg.norm(xs, axis=1))
    if profile.kind == "product_plateau":
        return np.prod(_h(profile, np.abs(xs)), axis=1)
    if profile.kind == "indicator_ball":
        return (np.linalg.norm(xs, axis=1) <= profile.plateau_radius).astype(float)
    return np.array([float(profile.custom_f(row)) for row in xs])


def eval_f_grad(profile: LocalisationProfile, x) -> np.ndarray:
    """∇f(x)"""
    if not profile.differentiable:
        raise NonDifferentiable(detail=profile.kind)
    point = _as_points(profile, x)
    if profile.kind == "radial_plateau":
        r = float(np.linalg.norm(point))
        if r == 0.0:
            return np.zeros_like(point)
        return float(_h_prime(profile, r)) * point / r
    if profile.kind == "product_plateau":
        vals = _h(profile, np.abs(point))
        ders = _h_prime(profile, np.abs(point)) * np.sign(point)
        out = np.empty_like(point)
        for j in range(point.size):
            out[j] = ders[j] * np.prod(np.delete(vals, j))
        return out
    return np.asarray(profile.custom_grad(point), dtype=float)


def validate_even(profile: LocalisationProfile, samples: Optional[np.ndarray] = None, tol: float = 1e-12) -> None:
    """
    f(x) = f(-x) 검증

    Raises:
        ProfileNotEven: 표본점에서 짝함수 조건 위반
    """
    if samples is None:
        samples = sample_grid(profile.dimension, n=40, r_min=0.1, r_max=3.0 * profile.tail_radius)
    plus = eval_f_rows(profile, samples)
    minus = eval_f_rows(profile, -samples)
    worst = float(np.max(np.abs(plus - minus)))
    if worst > tol:
        raise ProfileNotEven(detail=f"max |f(x) - f(-x)| = {worst:.3e}")


def decay_bound(profile: LocalisationProfile, samples: Optional[np.ndarray] = None) -> float:
    """sup |f(x)|·⟨x⟩^ρ 표본 추정 (유한하면 감쇠 조건 만족)"""
    if samples is None:
        samples = sample_grid(profile.dimension, n=100, r_min=0.1, r_max=10.0 * profile.tail_radius)
    weight = (1.0 + np.sum(samples**2, axis=1)) ** (profile.decay_exponent / 2.0)
    return float(np.max(np.abs(eval_f_rows(profile, samples)) * weight))


def sample_grid(d: int, n: int = 100, r_min: float = 0.5, r_max: float = 50.0, seed: int = 0) -> np.ndarray:
    """로그 간격 반지름 + 시드 고정 방향의 점 격자 (n, d)"""
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(n, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = np.geomspace(r_min, r_max, n)
    return directions * radii[:, None]


# ========== R_f ==========

def _kinks(profile: LocalisationProfile, point: np.ndarray) -> List[float]:
    """μ 축에서 피적분함수가 꺾이는 위치"""
    kinks: List[float] = []
    if profile.kind == "product_plateau":
        scales = [abs(c) for c in point if c != 0.0]
    elif profile.kind == "custom":
        return kinks
    else:
        scales = [float(np.linalg.norm(point))]
    for a in scales:
        kinks.append(profile.plateau_radius / a)
        if profile.kind != "indicator_ball":
            kinks.append((profile.plateau_radius + profile.decay_scale) / a)
    return kinks


def _quad(fn: Callable[[float], float], a: float, b: float, points: Sequence[float], epsabs: float):
    inner = sorted({p for p in points if a < p < b})
    if math.isinf(b):
        value, err = integrate.quad(fn, a, b, epsabs=epsabs, epsrel=1e-12, limit=400)
        return value, err
    value, err = integrate.quad(
        fn, a, b, points=inner or None, epsabs=epsabs, epsrel=1e-12, limit=400
    )
    return value, err


def _rf_once(profile: LocalisationProfile, point: np.ndarray, epsabs: float):
    def f_at(mu: float) -> float:
        return float(eval_f_rows(profile, (mu * point)[None, :])[0])

    kinks = _kinks(profile, point)
    lower, err_lo = _quad(lambda mu: (f_at(mu) - 1.0) / mu if mu > 0 else 0.0, 0.0, 1.0, kinks, epsabs)
    if profile.kind == "custom":
        upper, err_hi = _quad(lambda mu: f_at(mu) / mu, 1.0, math.inf, [], epsabs)
    else:
        scale = float(np.max(np.abs(point))) if profile.kind == "product_plateau" else float(np.linalg.norm(point))
        mu_max = max(profile.tail_radius / scale, 1.0)
        upper, err_hi = _quad(lambda mu: f_at(mu) / mu, 1.0, mu_max, kinks, epsabs) if mu_max > 1.0 else (0.0, 0.0)
    return lower + upper, err_lo + err_hi


def eval_Rf(profile: LocalisationProfile, x) -> RfValue:
    """
    R_f(x) 적응 구적

    μ = 1 과 plateau 경계에서 구간을 나누고, f 가 1e-18 아래로 떨어지는 곳에서 꼬리를 자릅니다.
    오차 추정은 허용치를 100배 조인 재계산과의 차이와 구적 오차 중 큰 값입니다.

    Raises:
        SingularAtOrigin: |x| = 0
    """
    point = _as_points(profile, x)
    if float(np.linalg.norm(point)) == 0.0:
        raise SingularAtOrigin()
    value, err = _rf_once(profile, point, settings.QUAD_EPSABS)
    fine, fine_err = _rf_once(profile, point, settings.QUAD_EPSABS * 1e-2)
    return RfValue(value=fine, quadrature_error_estimate=max(abs(fine - value), err, fine_err))


# ========== R_f' ==========

@lru_cache(maxsize=64)
def _radial_gradient_integral(profile: LocalisationProfile) -> float:
    """∫_0^∞ h'(s) ds (해석적으로 -1)"""
    r0, w = profile.plateau_radius, profile.decay_scale
    value, _ = integrate.quad(
        lambda s: float(_h_prime(profile, s)),
        r0,
        profile.tail_radius,
        points=[r0 + w],
        epsabs=settings.QUAD_EPSABS * 1e-2,
        epsrel=1e-13,
        limit=400,
    )
    return value


def _product_component(profile: LocalisationProfile, point: np.ndarray, j: int, epsabs: float) -> float:
    xj = point[j]
    if xj == 0.0:
        return 0.0
    a = abs(xj)
    mu_lo = profile.plateau_radius / a
    mu_hi = profile.tail_radius / a
    others = np.delete(point, j)

    def integrand(mu: float) -> float:
        d = float(_h_prime(profile, mu * a)) * math.copysign(1.0, xj)
        if others.size:
            d *= float(np.prod(_h(profile, np.abs(mu * others))))
        return d

    value, _ = _quad(integrand, mu_lo, mu_hi, _kinks(profile, point), epsabs)
    return value


def _custom_component(profile: LocalisationProfile, point: np.ndarray, j: int, epsabs: float) -> float:
    value, _ = integrate.quad(
        lambda mu: float(np.asarray(profile.custom_grad(mu * point))[j]),
        0.0,
        math.inf,
        epsabs=epsabs,
        limit=400,
    )
    return value


def eval_Rf_grad(profile: LocalisationProfile, x, method: str = "auto") -> np.ndarray:
    """
    ∇R_f(x)

    Args:
        method: "auto" (방사형은 닫힌 형태, 그 외 구적), "closed", "quadrature"

    Raises:
        SingularAtOrigin: |x| = 0
        NonDifferentiable: indicator_ball 또는 grad 없는 custom
    """
    point = _as_points(profile, x)
    if not profile.differentiable:
        raise NonDifferentiable(detail=profile.kind)
    r2 = float(np.dot(point, point))
    if r2 == 0.0:
        raise SingularAtOrigin()
    if profile.is_radial and method in ("auto", "closed"):
        return -point / r2
    if method == "closed":
        raise NonDifferentiable(detail=f"no closed form for {profile.kind}")
    if profile.kind == "radial_plateau":
        return point / r2 * _radial_gradient_integral(profile)
    epsabs = settings.QUAD_EPSABS * 1e-2
    if profile.kind == "product_plateau":
        return np.array([_product_component(profile, point, j, epsabs) for j in range(point.size)])
    return np.array([_custom_component(profile, point, j, epsabs) for j in range(point.size)])


def eval_Rf_grad_rows(profile: LocalisationProfile, xs: np.ndarray, method: str = "auto") -> np.ndarray:
    """
    여러 점에서 ∇R_f 평가 (함수 계산법용, xs: (n, d))

    방사형은 벡터화, 그 외는 고유한 행마다 한 번씩만 구적합니다.
    """
    xs = np.asarray(xs, dtype=float).reshape(-1, profile.dimension)
    if not profile.differentiable:
        raise NonDifferentiable(detail=profile.kind)
    r2 = np.sum(xs**2, axis=1)
    if np.any(r2 == 0.0):
        raise SingularAtOrigin(detail=f"{int(np.sum(r2 == 0.0))} rows at origin")
    if profile.is_radial and method in ("auto", "closed"):
        return -xs / r2[:, None]
    if profile.kind == "radial_plateau":
        return xs / r2[:, None] * _radial_gradient_integral(profile)
    keys = np.round(xs, 12)
    unique, inverse = np.unique(keys, axis=0, return_inverse=True)
    values = np.array([eval_Rf_grad(profile, row, method="quadrature") for row in unique])
    logger.debug("eval_Rf_grad_rows: %d rows, %d unique quadratures", xs.shape[0], unique.shape[0])
    return values[np.asarray(inverse).reshape(-1)]


# ========== 검증 ==========

@dataclass
class HomogeneityReport:
    """동차성 / 오일러 관계 잔차"""

    max_residual_by_order: Dict[int, float]
    euler_max: float
    points: int


def _gradient(profile: LocalisationProfile, point: np.ndarray) -> np.ndarray:
    return eval_Rf_grad(profile, point)


def _hessian(profile: LocalisationProfile, point: np.ndarray) -> np.ndarray:
    h = 1e-4 * float(np.linalg.norm(point))
    d = point.size
    out = np.empty((d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        out[:, k] = richardson_central_difference(lambda s: _gradient(profile, point + s * e), h)
    return out


def check_homogeneity(
    profile: LocalisationProfile,
    xs: np.ndarray,
    ts: Sequence[float],
    max_order: int = 2,
) -> HomogeneityReport:
    """
    t^{|α|} (∂^α R_f)(tx) = (∂^α R_f)(x) 검사

    |α| = 0 은 재규격화된 형태 R_f(tx) - R_f(x) + ln t 로 검사합니다.
    |α| = 1 은 기울기 공식, |α| = 2 는 기울기의 중심 차분 (Richardson 1회).
    """
    if not profile.differentiable and max_order >= 1:
        raise NonDifferentiable(detail=profile.kind)
    xs = np.asarray(xs, dtype=float).reshape(-1, profile.dimension)
    residuals = {order: 0.0 for order in range(max_order + 1)}
    euler = 0.0
    for x in xs:
        base_r = eval_Rf(profile, x).value
        base_g = _gradient(profile, x) if max_order >= 1 else None
        base_h = _hessian(profile, x) if max_order >= 2 else None
        euler = max(euler, abs(float(np.dot(x, base_g)) + 1.0)) if base_g is not None else euler
        for t in ts:
            tx = t * x
            r0 = base_r if t == 1 else eval_Rf(profile, tx).value
            residuals[0] = max(residuals[0], abs(r0 - base_r + math.log(t)))
            if max_order >= 1:
                residuals[1] = max(residuals[1], float(np.max(np.abs(t * _gradient(profile, tx) - base_g))))
            if max_order >= 2:
                residuals[2] = max(residuals[2], float(np.max(np.abs(t**2 * _hessian(profile, tx) - base_h))))
    logger.info("homogeneity[%s]: %s, euler=%.3e", profile.kind, residuals, euler)
    return HomogeneityReport(max_residual_by_order=residuals, euler_max=euler, points=int(xs.shape[0]))


def check_euler_relation(profile: LocalisationProfile, xs: np.ndarray, method: str = "auto") -> float:
    """max |x·R_f'(x) + 1|"""
    grads = eval_Rf_grad_rows(profile, xs, method=method)
    return float(np.max(np.abs(np.sum(np.asarray(xs) * grads, axis=1) + 1.0)))


def check_radial_closed_form(profile: LocalisationProfile, xs: np.ndarray) -> float:
    """구적 경로와 닫힌 형태 -x/|x|² 의 최대 차이 (방사형 전용)"""
    quad = eval_Rf_grad_rows(profile, xs, method="quadrature")
    closed = -np.asarray(xs) / np.sum(np.asarray(xs) ** 2, axis=1)[:, None]
    return float(np.max(np.abs(quad - closed)))


def check_log_shift(profile: LocalisationProfile, xs: np.ndarray, t: float = 2.0) -> float:
    """max |R_f(tx) - R_f(x) + ln t|"""
    worst = 0.0
    for x in np.asarray(xs, dtype=float).reshape(-1, profile.dimension):
        worst = max(worst, abs(eval_Rf(profile, t * x).value - eval_Rf(profile, x).value + math.log(t)))
    return worst
