"""
체류 시간 차이 I_r 과 r → ∞ 외삽

I_r = ½ ∫_0^∞ dt g(t),
g(t) = ⟨φ, e^{-itH} f(Φ/r) e^{itH} φ⟩ - ⟨φ, e^{itH} f(Φ/r) e^{-itH} φ⟩

Φ 가 모델 기저에서 대각이므로 g(t) = Σ_x f(x/r) (|ψ_+(t, x)|² - |ψ_-(t, x)|²), ψ_± = e^{±itH}φ.
밀도는 r 과 무관하므로 스윕 전체가 EvolutionCache 하나를 공유합니다.
"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from app.core.config import settings
from app.core.exceptions import BadDimension, TailNotDecaying, ZeroVelocity
from app.schemas.report import CheckRecord, ConvergenceRow, ConvergenceTableModel
from app.services.linalg import JointSpectralData
from app.services.localisation import LocalisationProfile, eval_f_rows
from app.services.model_catalog import OperatorPair
from app.services.spectral import hprime_columns
from app.utils.extrapolation import power_law_fit
from app.utils.quadrature import simpson_with_error

logger = logging.getLogger(__name__)

_CHUNK = 256
# ‖φ‖ = 1 기준, 이보다 작은 g 는 신호 없음
_SIGNAL_FLOOR = 1e-13


@dataclass(frozen=True)
class SojournResult:
    r: float
    I_r: float
    t_max_used: float
    tail_estimate: float
    quadrature_error: float
    converged: bool = True

    def row(self) -> ConvergenceRow:
        return ConvergenceRow(
            r=self.r,
            I_r=self.I_r,
            t_max=self.t_max_used,
            tail=self.tail_estimate,
            err=self.quadrature_error,
            converged=self.converged,
        )


@dataclass
class ConvergenceTable:
    label: str
    rows: List[SojournResult]
    extrapolated: float
    amplitude: float
    exponent: Optional[float]
    target: float
    relative_gap: float
    norm_defect: float = 0.0  # 공유 EvolutionCache 의 최대 노름 편차

    def to_model(self) -> ConvergenceTableModel:
        return ConvergenceTableModel(
            label=self.label,
            rows=[r.row() for r in self.rows],
            extrapolated=self.extrapolated,
            amplitude=self.amplitude,
            exponent=self.exponent,
            target=self.target,
            relative_gap=self.relative_gap,
        )


@dataclass(eq=False)
class EvolutionCache:
    """
    균일 t 격자 위의 |e^{±itH}φ|² 밀도

    extend(n) 은 필요한 만큼만 청크 단위로 계산합니다.
    청크마다 Σ_x |ψ_±(t, x)|² = ‖φ‖² 를 확인하고 최대 상대 편차를 norm_defect 에 남깁니다.
    """

    basis: np.ndarray  # 상태가 실린 고유벡터 (dim, s)
    energies: np.ndarray  # (s,)
    coefficients: np.ndarray  # (s,)
    dt: float
    plus: List[np.ndarray] = field(default_factory=list)  # (chunk, dim)
    minus: List[np.ndarray] = field(default_factory=list)
    norm_defect: float = field(default=0.0, init=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def for_state(cls, spectral: JointSpectralData, phi: np.ndarray, dt: float) -> "EvolutionCache":
        coeffs = spectral.coefficients(np.asarray(phi, dtype=complex))
        keep = np.abs(coeffs) > 1e-14 * max(float(np.max(np.abs(coeffs), initial=0.0)), 1e-300)
        return cls(
            basis=spectral.basis[:, keep],
            energies=spectral.values("H")[keep],
            coefficients=coeffs[keep],
            dt=float(dt),
        )

    @property
    def samples(self) -> int:
        return sum(c.shape[0] for c in self.plus)

    def _evolve(self, times: np.ndarray, sign: float) -> np.ndarray:
        phases = np.exp(sign * 1j * np.outer(self.energies, times)) * self.coefficients[:, None]
        return np.abs(self.basis @ phases).T ** 2

    def _check_norm(self, plus: np.ndarray, minus: np.ndarray, start: int) -> None:
        norm = float(np.sum(np.abs(self.coefficients) ** 2))
        if norm <= 0:
            return
        defect = max(float(np.max(np.abs(d.sum(axis=1) - norm))) for d in (plus, minus)) / norm
        if defect > settings.UNITARY_TOL and defect > self.norm_defect:
            logger.warning(
                "EvolutionCache: norm drift %.2e above %.0e from t=%.3g (dt=%.3g)",
                defect,
                settings.UNITARY_TOL,
                start * self.dt,
                self.dt,
            )
        self.norm_defect = max(self.norm_defect, defect)

    def extend(self, n: int) -> None:
        with self._lock:
            while self.samples < n:
                start = self.samples
                times = self.dt * np.arange(start, start + _CHUNK)
                plus, minus = self._evolve(times, +1.0), self._evolve(times, -1.0)
                self._check_norm(plus, minus, start)
                self.plus.append(plus)
                self.minus.append(minus)

    def densities(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        self.extend(n)
        return np.concatenate(self.plus)[:n], np.concatenate(self.minus)[:n]


def packet_width(pair: OperatorPair, phi: np.ndarray) -> float:
    """sqrt(⟨|Φ - ⟨Φ⟩|²⟩_φ)"""
    x = pair.positions()
    rho = np.abs(np.asarray(phi)) ** 2
    rho = rho / rho.sum()
    mean = rho @ x
    return float(np.sqrt(rho @ np.sum((x - mean) ** 2, axis=1)))


def _max_velocity(spectral: JointSpectralData, cache: EvolutionCache) -> float:
    hp = hprime_columns(spectral)
    lam = spectral.values("H")
    on_state = np.isin(lam, cache.energies)
    speed = np.linalg.norm(hp[on_state], axis=1) if np.any(on_state) else np.linalg.norm(hp, axis=1)
    return float(speed.max(initial=0.0))


def default_dt(cache_energies: np.ndarray, r: float, profile: LocalisationProfile, v_max: float) -> float:
    """스펙트럼 폭과 f(Φ/r) 전이 구간 통과 시간 중 작은 쪽에 맞춘 t 간격"""
    spread = float(np.ptp(cache_energies)) if cache_energies.size else 0.0
    candidates = [np.pi / (4.0 * spread)] if spread > 0 else []
    if v_max > 0:
        candidates.append(0.1 * r * min(profile.plateau_radius, profile.decay_scale) / v_max)
    return min(candidates) if candidates else 1.0


def _tail(values: np.ndarray, dt: float) -> float:
    """꼬리 구간의 |g| 지수 감쇠 적합으로 ∫_T^∞ g dt 추정"""
    last = float(values[-1])
    magnitude = np.abs(values)
    usable = magnitude > 0
    if np.count_nonzero(usable) >= 3:
        t = dt * np.flatnonzero(usable)
        slope = float(np.polyfit(t, np.log(magnitude[usable]), 1)[0])
        if slope < 0:
            return last / -slope
    return last * dt * values.size


def sojourn_integral(
    pair: OperatorPair,
    spectral: JointSpectralData,
    profile: LocalisationProfile,
    r: float,
    phi: np.ndarray,
    tail_tol: Optional[float] = None,
    dt: Optional[float] = None,
    t_budget: Optional[float] = None,
    cache: Optional[EvolutionCache] = None,
) -> SojournResult:
    """
    I_r = ½ ∫_0^{T} g dt + 꼬리

    꼬리 창 (마지막 5%, 최소 16 표본) 의 max|g| 가 tail_tol·max|g| 아래로 내려갈 때까지 T 를 늘립니다.
    T 는 되돌아옴 시간 추정 0.5·box_extent / max|H'| 를 넘지 않습니다.

    Raises:
        TailNotDecaying: 상한 안에서 g 가 감쇠하지 않음
        ZeroVelocity: 상태 위에서 H' 가 0 이고 t_budget 도 없음
    """
    if r <= 0:
        raise BadDimension(detail=f"r must be > 0, got {r}")
    phi = np.asarray(phi, dtype=complex)
    if not np.any(phi):
        return SojournResult(r=float(r), I_r=0.0, t_max_used=0.0, tail_estimate=0.0, quadrature_error=0.0)
    tail_tol = settings.TAIL_TOL if tail_tol is None else tail_tol

    if cache is None:
        seed = EvolutionCache.for_state(spectral, phi, dt=1.0)
        v_max = _max_velocity(spectral, seed)
        step = dt or default_dt(seed.energies, r, profile, v_max)
        cache = EvolutionCache(seed.basis, seed.energies, seed.coefficients, step)
    else:
        v_max = _max_velocity(spectral, cache)
    if v_max > 0:
        cap = 0.5 * pair.box_extent / v_max
        cap = min(cap, t_budget) if t_budget else cap
    elif t_budget:
        cap = t_budget
    else:
        raise ZeroVelocity(detail="H' vanishes on the state and no t_budget is given")

    weights = eval_f_rows(profile, pair.positions() / r)
    limit = max(int(np.ceil(cap / cache.dt)), 5)
    n = min(_CHUNK, limit)
    g = np.zeros(0)
    while True:
        plus, minus = cache.densities(n)
        g = (plus - minus) @ weights
        peak = float(np.max(np.abs(g)))
        window = max(16, n // 20)
        after_peak = n - window > int(np.argmax(np.abs(g)))
        if peak > _SIGNAL_FLOOR and after_peak and float(np.max(np.abs(g[-window:]))) < tail_tol * peak:
            break
        if n >= limit:
            if peak <= _SIGNAL_FLOOR:
                logger.debug("sojourn_integral(r=%g): no signal up to t=%.1f", r, n * cache.dt)
                return SojournResult(r=float(r), I_r=0.0, t_max_used=n * cache.dt, tail_estimate=0.0, quadrature_error=0.0)
            raise TailNotDecaying(
                detail=(
                    f"r={r:g}: |g| = {float(np.max(np.abs(g[-window:]))):.3e} of peak {peak:.3e} "
                    f"at revival cap t={cap:.1f} (box {pair.box_extent:g}, max |H'| {v_max:.3g})"
                )
            )
        n = min(n + _CHUNK, limit)

    if g.size % 2 == 0:
        g = g[:-1]
    integral, err = simpson_with_error(g, cache.dt)
    window = max(16, g.size // 20)
    tail = _tail(g[-window:], cache.dt)
    value = 0.5 * (integral + tail)
    converged = abs(0.5 * tail) <= 0.01 * abs(value) or abs(value) <= _SIGNAL_FLOOR
    if not converged:
        logger.warning("sojourn_integral(r=%g): tail %.3e exceeds 1%% of I_r=%.6g", r, 0.5 * tail, value)
    logger.debug("sojourn_integral(r=%g): I_r=%.8g T=%.2f dt=%.3g tail=%.2e err=%.2e", r, value, (g.size - 1) * cache.dt, cache.dt, 0.5 * tail, 0.5 * err)
    return SojournResult(
        r=float(r),
        I_r=float(value),
        t_max_used=float((g.size - 1) * cache.dt),
        tail_estimate=float(0.5 * tail),
        quadrature_error=float(0.5 * err),
        converged=converged,
    )


def sojourn_sweep(
    pair: OperatorPair,
    spectral: JointSpectralData,
    profile: LocalisationProfile,
    phi: np.ndarray,
    r_list: Sequence[float],
    target: complex | float,
    label: str = "sojourn",
    tail_tol: Optional[float] = None,
    jobs: int = 1,
    relative_floor: float = 1e-12,
) -> ConvergenceTable:
    """
    r 마다 I_r 을 계산하고 I_r = I_∞ + c·r^{-p} 로 외삽

    Args:
        target: t_f(φ) (eval_tf_form 결과, 실수부만 사용)
        jobs: r 병렬 처리 스레드 수 (표는 r 순서로 조립)

    Raises:
        BadDimension: r_list 가 오름차순이 아니거나 상자 조건 r ≤ box_extent / (4·폭) 위반
        FitIllConditioned: 점 4개 미만
    """
    rs = [float(r) for r in r_list]
    if any(b <= a for a, b in zip(rs, rs[1:])):
        raise BadDimension(detail=f"r_list must be strictly ascending, got {rs}")
    phi = np.asarray(phi, dtype=complex)
    width = packet_width(pair, phi)
    bound = pair.box_extent / (4.0 * width) if width > 0 else np.inf
    if rs and rs[-1] > bound:
        raise BadDimension(detail=f"r={rs[-1]:g} exceeds box_extent/(4·width) = {bound:.3g}")

    seed = EvolutionCache.for_state(spectral, phi, dt=1.0)
    step = default_dt(seed.energies, rs[0], profile, _max_velocity(spectral, seed)) if rs else 1.0
    cache = EvolutionCache(seed.basis, seed.energies, seed.coefficients, step)

    def one(r: float) -> SojournResult:
        return sojourn_integral(pair, spectral, profile, r, phi, tail_tol=tail_tol, cache=cache)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, rs))
    else:
        rows = [one(r) for r in rs]

    fit = power_law_fit([row.r for row in rows], [row.I_r for row in rows])
    target_value = float(np.real(target))
    gap = abs(fit.limit - target_value) / max(abs(target_value), relative_floor)
    logger.info(
        "sojourn_sweep[%s]: I_inf=%.8g target=%.8g gap=%.3e p=%s",
        label,
        fit.limit,
        target_value,
        gap,
        "flat" if fit.exponent is None else f"{fit.exponent:.3f}",
    )
    return ConvergenceTable(
        label=label,
        rows=rows,
        extrapolated=fit.limit,
        amplitude=fit.amplitude,
        exponent=fit.exponent,
        target=target_value,
        relative_gap=gap,
        norm_defect=cache.norm_defect,
    )


def scaling_check(
    slow: OperatorPair,
    slow_spectral: JointSpectralData,
    fast: OperatorPair,
    fast_spectral: JointSpectralData,
    profile: LocalisationProfile,
    phi: np.ndarray,
    r: float,
    tolerance: float = 0.1,
) -> CheckRecord:
    """같은 상태와 r 에서 속도를 두 배로 하면 I_r 이 절반이 되는지 확인"""
    i_slow = sojourn_integral(slow, slow_spectral, profile, r, phi).I_r
    i_fast = sojourn_integral(fast, fast_spectral, profile, r, phi).I_r
    ratio = i_slow / i_fast if i_fast != 0 else np.inf
    return CheckRecord.evaluate(
        "sojourn.scaling",
        "I_r(v) = 2 I_r(2v) for constant velocity",
        abs(ratio - 2.0) / 2.0,
        tolerance,
        r=float(r),
        slow=float(i_slow),
        fast=float(i_fast),
    )
