"""
시간 연산자 T_f

필터 η 의 지지 위의 동시 고유벡터 U_S 로 압축한 행렬 T_S = U_S* T_f U_S 를 만듭니다.

    T_f = -½ Σ_j ( Φ_j G_j + G̃_j Φ_j |H'|^{-1} + i G̃_j (Σ_k H''_{jk} H'_k) |H'|^{-3} )

G_j = (∂_j R_f)(H'), G̃_j = (∂_j R_f)(H'/|H'|). 방사형 프로파일은 R_f' 가 f 와 무관하므로
    T = ½ ( Φ·H'/(H')² + H'/|H'|·Φ|H'|^{-1} + i H'/(H')⁴·(H''H') )
를 따로 조립합니다.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate

from app.core.config import settings
from app.core.exceptions import SingularCalculus, StateNotFiltered, UnsupportedModel
from app.schemas.report import CheckRecord
from app.services.commutators import DerivedOperators
from app.services.linalg import JointSpectralData, SpectralFilter
from app.services.localisation import LocalisationProfile, eval_Rf_grad_rows
from app.services.model_catalog import OperatorPair
from app.services.spectral import hprime_columns

logger = logging.getLogger(__name__)

# 필터 밖 질량 허용치 (상대)
_OUTSIDE_MASS = 1e-20


@dataclass(eq=False)
class TimeOperatorForm:
    """
    필터 범위로 압축한 T_f

    matrix 는 range_basis 좌표계의 (s, s) 행렬이며, 상태는 to_range 로 옮겨 씁니다.
    """

    matrix: np.ndarray
    range_basis: np.ndarray  # U_S (dim, s)
    energies: np.ndarray  # H 고유값 (s,)
    velocities: np.ndarray  # H'_j 고유값 (s, d)
    radial: bool
    spectral_filter: SpectralFilter
    profile: Optional[LocalisationProfile] = None
    form_only: bool = False
    ingredients: Dict[str, str] = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return int(self.range_basis.shape[1])

    def to_range(self, vector: np.ndarray) -> np.ndarray:
        return self.range_basis.conj().T @ vector

    def expectation(self, psi: np.ndarray, phi: np.ndarray) -> complex:
        """⟨ψ, T_f φ⟩"""
        return complex(np.vdot(self.to_range(psi), self.matrix @ self.to_range(phi)))

    def full_matrix(self) -> np.ndarray:
        u = self.range_basis
        return u @ self.matrix @ u.conj().T


# ========== 공통 ==========

def _support(spectral: JointSpectralData, spectral_filter: SpectralFilter) -> np.ndarray:
    return spectral_filter.evaluate(spectral.values("H")) > 0.0


def _checked_velocities(spectral: JointSpectralData, support: np.ndarray) -> np.ndarray:
    """
    Raises:
        SingularCalculus: 필터 지지 안에 |H'| ≈ 0 인 고유값 튜플
    """
    hp = hprime_columns(spectral)
    speed = np.linalg.norm(hp, axis=1)
    scale = max(float(speed.max(initial=0.0)), 1.0)
    singular = support & (speed <= settings.SINGULAR_TOL * scale)
    if np.any(singular):
        i = int(np.flatnonzero(singular)[0])
        raise SingularCalculus(
            detail=f"|H'| = {speed[i]:.3e} at H = {spectral.values('H')[i]:.6g} inside the filter support"
        )
    return hp[support]


def _compressed(basis: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    return basis.conj().T @ matrix @ basis


def _second_times_first(
    derived: DerivedOperators, basis: np.ndarray, velocities: np.ndarray, j: int
) -> np.ndarray:
    """U_S* (Σ_k H''_{jk} H'_k) U_S  (H'_k U_S = U_S diag(λ'_k))"""
    out = np.zeros((basis.shape[1], basis.shape[1]), dtype=complex)
    for k, lam_k in enumerate(velocities.T):
        out += _compressed(basis, derived.hpp[j][k].entries) * lam_k[None, :]
    return out


def build_Tf(
    pair: OperatorPair,
    derived: DerivedOperators,
    spectral: JointSpectralData,
    profile: LocalisationProfile,
    spectral_filter: SpectralFilter,
    radial: Optional[bool] = None,
) -> TimeOperatorForm:
    """
    T_f 를 필터 범위로 압축해 조립

    Args:
        radial: None 이면 프로파일이 방사형일 때 방사형 식을 사용

    Raises:
        SingularCalculus: 필터 지지 안에 H' 의 0 고유값
    """
    if profile.dimension != pair.d:
        raise UnsupportedModel(detail=f"profile dimension {profile.dimension} != model d={pair.d}")
    if derived.depth < 2:
        raise UnsupportedModel(detail="T_f needs H'' (depth >= 2)")
    radial = profile.is_radial if radial is None else radial
    support = _support(spectral, spectral_filter)
    lam_p = _checked_velocities(spectral, support)
    basis = spectral.basis[:, support]
    speed = np.linalg.norm(lam_p, axis=1)
    s = basis.shape[1]
    T = np.zeros((s, s), dtype=complex)

    if radial:
        for j in range(pair.d):
            phi_s = _compressed(basis, pair.Phi[j].entries)
            m_s = _second_times_first(derived, basis, lam_p, j)
            direction = lam_p[:, j] / speed
            T += phi_s * (lam_p[:, j] / speed**2)[None, :]
            T += direction[:, None] * phi_s * (1.0 / speed)[None, :]
            T += 1j * (lam_p[:, j] / speed**4)[:, None] * m_s
        T *= 0.5
    else:
        grad = eval_Rf_grad_rows(profile, lam_p)
        grad_unit = eval_Rf_grad_rows(profile, lam_p / speed[:, None])
        for j in range(pair.d):
            phi_s = _compressed(basis, pair.Phi[j].entries)
            m_s = _second_times_first(derived, basis, lam_p, j)
            T += phi_s * grad[:, j][None, :]
            T += grad_unit[:, j][:, None] * phi_s * (1.0 / speed)[None, :]
            T += 1j * grad_unit[:, j][:, None] * m_s * (speed**-3)[None, :]
        T *= -0.5

    logger.info(
        "build_Tf[%s]: %s branch, filter range %d/%d, ‖T‖_max=%.3e",
        pair.model_id,
        "radial" if radial else "general",
        s,
        pair.dim,
        float(np.max(np.abs(T))) if T.size else 0.0,
    )
    return TimeOperatorForm(
        matrix=T,
        range_basis=basis,
        energies=spectral.values("H")[support],
        velocities=lam_p,
        radial=radial,
        spectral_filter=spectral_filter,
        profile=profile,
        ingredients={"derived": derived.provenance, "profile": profile.kind, "model": pair.model_id},
    )


# ========== 2차 형식 ==========

def _require_filtered(spectral: JointSpectralData, support: np.ndarray, vector: np.ndarray, name: str) -> np.ndarray:
    coeffs = spectral.coefficients(vector)
    total = float(np.sum(np.abs(coeffs) ** 2))
    outside = float(np.sum(np.abs(coeffs[~support]) ** 2))
    if total > 0 and outside > _OUTSIDE_MASS * total:
        raise StateNotFiltered(detail=f"{name}: mass {outside / total:.3e} outside the filter support")
    return coeffs


def eval_tf_form(
    pair: OperatorPair,
    derived: DerivedOperators,
    spectral: JointSpectralData,
    profile: LocalisationProfile,
    spectral_filter: SpectralFilter,
    phi: np.ndarray,
    psi: Optional[np.ndarray] = None,
) -> complex:
    """
    t_f(ψ, φ) = -½ Σ_j { ⟨Φ_j ψ, (∂_j R_f)(H') φ⟩ + ⟨(∂_j R_f̄)(H') ψ, Φ_j φ⟩ }

    (∂_j R_f)(H') 는 필터 지지 위의 동시 함수 계산법으로 적용합니다.

    Raises:
        StateNotFiltered: 상태가 필터 지지 밖에 질량을 가짐
        SingularCalculus: 필터 지지 안에 |H'| ≈ 0
    """
    phi = np.asarray(phi, dtype=complex)
    psi = phi if psi is None else np.asarray(psi, dtype=complex)
    if not np.any(phi) or not np.any(psi):
        return 0.0 + 0.0j
    support = _support(spectral, spectral_filter)
    c_phi = _require_filtered(spectral, support, phi, "phi")
    c_psi = _require_filtered(spectral, support, psi, "psi")
    lam_p = _checked_velocities(spectral, support)
    grad = eval_Rf_grad_rows(profile, lam_p)
    total = 0.0 + 0.0j
    basis = spectral.basis[:, support]
    for j in range(pair.d):
        phi_mat = pair.Phi[j].entries
        g_phi = basis @ (grad[:, j] * c_phi[support])
        g_psi = basis @ (np.conj(grad[:, j]) * c_psi[support])
        total += np.vdot(phi_mat @ psi, g_phi) + np.vdot(g_psi, phi_mat @ phi)
    return complex(-0.5 * total)


# ========== 검사 ==========

def _as_range(tf: TimeOperatorForm, states: Sequence[np.ndarray]) -> List[np.ndarray]:
    out = []
    for v in states:
        c = tf.to_range(np.asarray(v, dtype=complex))
        norm = float(np.linalg.norm(c))
        if norm > 0:
            out.append(c / norm)
    return out


def ccr_residual(
    tf: TimeOperatorForm,
    states: Sequence[np.ndarray],
    tolerance: float = 1e-6,
    **details: Any,
) -> CheckRecord:
    """max_{ψ,φ} |⟨ψ, (T_f H - H T_f) φ⟩ - i⟨ψ, φ⟩|, details 는 기록에 그대로 붙습니다"""
    vecs = _as_range(tf, states)
    lam = tf.energies
    bracket = tf.matrix * lam[None, :] - lam[:, None] * tf.matrix
    worst = 0.0
    for a, psi in enumerate(vecs):
        for phi in vecs[a:]:
            value = np.vdot(psi, bracket @ phi) - 1j * np.vdot(psi, phi)
            worst = max(worst, abs(value))
    logger.info("ccr_residual: %d states, max %.3e", len(vecs), worst)
    return CheckRecord.evaluate("ccr", "[T_f, H] = i", worst, tolerance, states=len(vecs), **details)


def weyl_residual(
    tf: TimeOperatorForm,
    t_grid: Sequence[float],
    states: Sequence[np.ndarray],
    tolerance: float = 1e-6,
    **details: Any,
) -> CheckRecord:
    """
    max_φ ‖T_f e^{-itH}φ - e^{-itH}(T_f + t)φ‖ 의 t 별 프로파일

    허용 오차는 tolerance·(1 + t) 로 늘어납니다.
    """
    vecs = _as_range(tf, states)
    lam = tf.energies
    profile: List[float] = []
    worst_ratio = 0.0
    for t in t_grid:
        phase = np.exp(-1j * t * lam)
        worst = 0.0
        for phi in vecs:
            lhs = tf.matrix @ (phase * phi)
            rhs = phase * (tf.matrix @ phi + t * phi)
            worst = max(worst, float(np.linalg.norm(lhs - rhs)))
        profile.append(worst)
        worst_ratio = max(worst_ratio, worst / (1.0 + abs(t)))
    logger.info("weyl_residual: t in [%g, %g], max %.3e", min(t_grid), max(t_grid), max(profile, default=0.0))
    return CheckRecord.evaluate(
        "weyl",
        "T_f exp(-itH) phi = exp(-itH)(T_f + t) phi",
        worst_ratio,
        tolerance,
        t_grid=[float(t) for t in t_grid],
        profile=profile,
        **details,
    )


def reference_discrepancy(tf: TimeOperatorForm, reference: TimeOperatorForm, states: Sequence[np.ndarray]) -> float:
    """max_φ |⟨φ, (T_f - T_ref) φ⟩| (같은 필터 범위)"""
    if tf.rank != reference.rank:
        raise UnsupportedModel(detail=f"filter ranges differ: {tf.rank} vs {reference.rank}")
    worst = 0.0
    for phi in _as_range(tf, states):
        worst = max(worst, abs(np.vdot(phi, (tf.matrix - reference.matrix) @ phi)))
    return worst


def hermiticity_defect(tf: TimeOperatorForm, states: Sequence[np.ndarray]) -> float:
    """max |⟨ψ, Tφ⟩ - conj⟨φ, Tψ⟩|"""
    vecs = _as_range(tf, states)
    worst = 0.0
    for a, psi in enumerate(vecs):
        for phi in vecs[a:]:
            left = np.vdot(psi, tf.matrix @ phi)
            right = np.conj(np.vdot(phi, tf.matrix @ psi))
            worst = max(worst, abs(left - right))
    return worst


def form_consistency(
    tf: TimeOperatorForm,
    pair: OperatorPair,
    derived: DerivedOperators,
    spectral: JointSpectralData,
    states: Sequence[np.ndarray],
    tolerance: float = 1e-6,
) -> CheckRecord:
    """max_φ |t_f(φ) - ⟨φ, T_f φ⟩| (‖φ‖ = 1)"""
    if tf.profile is None:
        raise UnsupportedModel(detail="time operator was built without a profile")
    worst = 0.0
    for v in states:
        phi = np.asarray(v, dtype=complex)
        norm = float(np.linalg.norm(phi))
        if norm == 0:
            continue
        phi = phi / norm
        form = eval_tf_form(pair, derived, spectral, tf.profile, tf.spectral_filter, phi)
        worst = max(worst, abs(form - tf.expectation(phi, phi)))
    return CheckRecord.evaluate("form_consistency", "t_f(phi) = <phi, T_f phi>", worst, tolerance, states=len(states))


def simplified_tf_discrepancy(
    tf: TimeOperatorForm,
    pair: OperatorPair,
    spectral: JointSpectralData,
    states: Sequence[np.ndarray],
) -> float:
    """
    max_φ |⟨φ, (T_f - T_simple) φ⟩|, T_simple = -½ Σ_j (Φ_j R_f'(H')_j + R_f'(H')_j Φ_j)

    방사형이거나 d = 1 이면 0 에 가깝고, 곱 프로파일 d ≥ 2 에서만 벌어집니다.
    """
    profile = tf.profile
    if profile is None:
        raise UnsupportedModel(detail="time operator was built without a profile")
    grad = eval_Rf_grad_rows(profile, tf.velocities)
    simple = np.zeros_like(tf.matrix)
    for j in range(pair.d):
        phi_s = _compressed(tf.range_basis, pair.Phi[j].entries)
        simple += phi_s * grad[:, j][None, :] + grad[:, j][:, None] * phi_s
    simple *= -0.5
    worst = 0.0
    for phi in _as_range(tf, states):
        worst = max(worst, abs(np.vdot(phi, (tf.matrix - simple) @ phi)))
    return worst


# ========== 기준 연산자 ==========

def fourier_time_operator(pair: OperatorPair, spectral: JointSpectralData, spectral_filter: SpectralFilter) -> TimeOperatorForm:
    """½ Σ_j (Φ_j g_j + g_j Φ_j), g = H'/(H')² (H'' 를 쓰지 않는 독립 경로)"""
    support = _support(spectral, spectral_filter)
    lam_p = _checked_velocities(spectral, support)
    basis = spectral.basis[:, support]
    sq = np.sum(lam_p**2, axis=1)
    T = np.zeros((basis.shape[1], basis.shape[1]), dtype=complex)
    for j in range(pair.d):
        g = lam_p[:, j] / sq
        phi_s = _compressed(basis, pair.Phi[j].entries)
        T += phi_s * g[None, :] + g[:, None] * phi_s
    return TimeOperatorForm(
        matrix=0.5 * T,
        range_basis=basis,
        energies=spectral.values("H")[support],
        velocities=lam_p,
        radial=True,
        spectral_filter=spectral_filter,
        ingredients={"route": "fourier", "model": pair.model_id},
    )


def reference_time_operator_waveguide(
    pair: OperatorPair, spectral: JointSpectralData, spectral_filter: SpectralFilter
) -> TimeOperatorForm:
    """
    ¼ (Q P^{-1} + P^{-1} Q), P = 종방향 운동량 (H' = 2P)

    Raises:
        UnsupportedModel: 도파관 모델이 아님
    """
    if pair.model_id != "waveguide":
        raise UnsupportedModel(detail=f"{pair.model_id} is not a waveguide")
    support = _support(spectral, spectral_filter)
    lam_p = _checked_velocities(spectral, support)
    basis = spectral.basis[:, support]
    p_inv = 2.0 / lam_p[:, 0]
    q_s = _compressed(basis, pair.Phi[0].entries)
    T = 0.25 * (q_s * p_inv[None, :] + p_inv[:, None] * q_s)
    return TimeOperatorForm(
        matrix=T,
        range_basis=basis,
        energies=spectral.values("H")[support],
        velocities=lam_p,
        radial=True,
        spectral_filter=spectral_filter,
        ingredients={"route": "waveguide_reference"},
    )


# ========== 스펙트럼 표현 ==========

def _monotone_branches(xi: np.ndarray, slope: np.ndarray, periodic: bool) -> List[np.ndarray]:
    """ξ 오름차순 인덱스를 m' 부호가 일정한 연속 구간으로 나눔"""
    order = np.argsort(xi, kind="stable")
    sign = np.sign(slope[order])
    n = order.size
    start = 0
    if periodic:
        changes = np.flatnonzero(sign != np.roll(sign, 1))
        if changes.size:
            start = int(changes[0])
    rotated = np.roll(order, -start)
    rsign = np.roll(sign, -start)
    branches: List[np.ndarray] = []
    current: List[int] = []
    current_sign = 0.0
    for k in range(n):
        s = rsign[k]
        if s == 0 or (current and s != current_sign):
            if len(current) >= 3:
                branches.append(np.array(current))
            current = []
        if s != 0:
            current.append(int(rotated[k]))
            current_sign = s
    if len(current) >= 3:
        branches.append(np.array(current))
    return branches


def spectral_derivative_check(
    tf: TimeOperatorForm,
    pair: OperatorPair,
    psi: np.ndarray,
    phi: np.ndarray,
    tolerance: float = 1e-3,
) -> CheckRecord:
    """
    ⟨ψ, T_f φ⟩ 와 ∫ dλ ⟨(Uψ)(λ), i d(Uφ)/dλ(λ)⟩ 비교

    단조 가지마다 u(λ) = c(ξ) / sqrt(Δξ |m'(ξ)|) 로 스펙트럼 표현을 만들고,
    λ 에 대한 2차 정확도 차분과 사다리꼴 적분을 씁니다.

    Raises:
        UnsupportedModel: d = 1 심볼 모델이 아니거나 심볼이 상수
    """
    sym = pair.exact
    if sym is None or pair.d != 1 or len(sym.offsets) != 1:
        raise UnsupportedModel(detail=f"{pair.model_id}: needs a one-dimensional single-branch symbol")
    slope = sym.gradient[:, 0]
    if not np.any(slope):
        raise UnsupportedModel(detail=f"{pair.model_id}: constant symbol has no spectral derivative")
    xi = sym.momenta[:, 0]
    spacing = float(np.min(np.diff(np.unique(xi))))
    c_psi = sym.basis.conj().T @ np.asarray(psi, dtype=complex)
    c_phi = sym.basis.conj().T @ np.asarray(phi, dtype=complex)
    integral = 0.0 + 0.0j
    branches = _monotone_branches(xi, slope, sym.periodic)
    for idx in branches:
        lam = sym.values[idx]
        order = np.argsort(lam, kind="stable")
        idx, lam = idx[order], lam[order]
        density = np.sqrt(spacing * np.abs(slope[idx]))
        u_psi = c_psi[idx] / density
        u_phi = c_phi[idx] / density
        derivative = np.gradient(u_phi, lam, edge_order=2)
        integral += integrate.trapezoid(np.conj(u_psi) * 1j * derivative, lam)
    direct = tf.expectation(psi, phi)
    scale = max(abs(direct), 1e-12)
    relative = abs(direct - integral) / scale
    logger.info(
        "spectral_derivative_check[%s]: %d branches, direct=%.6g%+.6gj, spectral=%.6g%+.6gj, rel %.3e",
        pair.model_id,
        len(branches),
        direct.real,
        direct.imag,
        integral.real,
        integral.imag,
        relative,
    )
    return CheckRecord.evaluate(
        "spectral_derivative",
        "<psi, T_f phi> = int dl <U psi, i d(U phi)/dl>",
        relative,
        tolerance,
        model=pair.model_id,
        branches=len(branches),
        direct=[direct.real, direct.imag],
        spectral=[integral.real, integral.imag],
    )
