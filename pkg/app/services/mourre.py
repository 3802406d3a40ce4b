"""
켤레 연산자 A 와 Mourre 추정

Π_j = ⟨H⟩^{-2} H'_j ⟨H⟩^{-2},  A = ½ Σ_j (Π_j Φ_j + Φ_j Π_j)
i[H, A] = ⟨H⟩^{-2} (H')² ⟨H⟩^{-2}

유한 절단에서 i[H, A] 는 H 의 고유벡터 위 대각 성분이 모두 0 (virial) 이므로,
창 검사는 interior 부분공간 안에 머무는 창 벡터 방향들 위에서 행렬 i[H, A] 를 봅니다.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

from app.core.config import settings
from app.core.exceptions import EmptyWindow
from app.schemas.report import CheckRecord
from app.services.commutators import DerivedOperators
from app.services.linalg import HermitianOperator, JointSpectralData, operator_norm, split_clusters
from app.services.model_catalog import InteriorSubspace, OperatorPair, interior_subspace
from app.services.spectral import CriticalPoint, CriticalSetEstimate, hprime_columns, merge_critical_points

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WindowForms:
    """
    H 고유값 순으로 정렬한 동시 기저 W 위의 interior 이차형식

    gram = (V*W)*(V*W),  form = (V*W)* V* i[H, A] V (V*W)
    """

    lam: np.ndarray
    sq: np.ndarray  # Σ_j λ'_j²
    gram: np.ndarray
    form: np.ndarray

    @property
    def weight(self) -> np.ndarray:
        """⟨λ⟩^{-4} (H')², 정확한 i[H, A] 의 동시 고유값"""
        return self.sq / (1.0 + self.lam**2) ** 2

    def window(self, center: float, delta: float) -> slice:
        """center - delta < λ < center + delta 인 정렬 인덱스 구간"""
        lo = int(np.searchsorted(self.lam, center - delta, side="right"))
        hi = int(np.searchsorted(self.lam, center + delta, side="left"))
        return slice(lo, max(lo, hi))


@dataclass(eq=False)
class ConjugateOperatorData:
    Pi: List[HermitianOperator]
    A: HermitianOperator
    commutator_iHA: HermitianOperator  # 행렬 경로 i[H, A]
    commutator_exact: HermitianOperator  # ⟨H⟩^{-2} (H')² ⟨H⟩^{-2}
    resolvent_square: np.ndarray  # ⟨H⟩^{-2}
    interior: InteriorSubspace
    _forms: Dict[int, Tuple[JointSpectralData, WindowForms]] = field(default_factory=dict, init=False, repr=False)

    def asymmetry(self) -> float:
        a = self.A.entries
        return float(np.max(np.abs(a - a.conj().T)))

    def window_forms(self, spectral: JointSpectralData) -> WindowForms:
        cached = self._forms.get(id(spectral))
        if cached is not None and cached[0] is spectral:
            return cached[1]
        lam = spectral.values("H")
        order = np.argsort(lam, kind="stable")
        inner = self.interior.left(spectral.basis[:, order])
        compressed = self.interior.compress(self.commutator_iHA.entries)
        gram = inner.conj().T @ inner
        form = inner.conj().T @ compressed @ inner
        forms = WindowForms(
            lam=lam[order],
            sq=np.sum(hprime_columns(spectral) ** 2, axis=1)[order],
            gram=0.5 * (gram + gram.conj().T),
            form=0.5 * (form + form.conj().T),
        )
        self._forms[id(spectral)] = (spectral, forms)
        return forms


def _hermitian(matrix: np.ndarray, label: str) -> HermitianOperator:
    return HermitianOperator(entries=0.5 * (matrix + matrix.conj().T), label=label)


def build_conjugate(pair: OperatorPair, derived: DerivedOperators) -> ConjugateOperatorData:
    """Π_j, A, i[H, A] 조립"""
    H = pair.H.entries
    evals, U = scipy.linalg.eigh(H)
    R = (U / (1.0 + evals**2)) @ U.conj().T
    R = 0.5 * (R + R.conj().T)
    Pi = [_hermitian(R @ h.entries @ R, f"Pi_{j + 1}") for j, h in enumerate(derived.hp)]
    A = sum(p.entries @ phi.entries + phi.entries @ p.entries for p, phi in zip(Pi, pair.Phi)) * 0.5
    A_op = _hermitian(A, "A")
    iHA = _hermitian(1j * (H @ A_op.entries - A_op.entries @ H), "i[H,A]")
    exact = _hermitian(R @ derived.hprime_squared() @ R, "<H>^-2 (H')^2 <H>^-2")
    logger.info("build_conjugate[%s]: ‖A‖=%.3e ‖i[H,A]‖=%.3e", pair.model_id, A_op.norm(), iHA.norm())
    return ConjugateOperatorData(
        Pi=Pi,
        A=A_op,
        commutator_iHA=iHA,
        commutator_exact=exact,
        resolvent_square=R,
        interior=interior_subspace(pair),
    )


def check_commutator_identity(
    pair: OperatorPair,
    data: ConjugateOperatorData,
    derived: DerivedOperators,
    tolerance: float = 1e-8,
    halo: float = 0.0,
) -> CheckRecord:
    """
    ‖V*(i[H, A] - ⟨H⟩^{-2}(H')²⟨H⟩^{-2})V‖ / ‖(H')²‖

    interior 최소 고유값으로 양정치성도 함께 기록합니다.
    """
    sub = interior_subspace(pair, halo=halo)
    difference = sub.compress(data.commutator_iHA.entries - data.commutator_exact.entries)
    scale = operator_norm(derived.hprime_squared())
    residual = operator_norm(difference)
    residual = residual / scale if scale > 0 else residual
    compressed = sub.compress(data.commutator_iHA.entries)
    lowest = float(scipy.linalg.eigvalsh(0.5 * (compressed + compressed.conj().T))[0]) if compressed.size else 0.0
    logger.info("check_commutator_identity[%s]: residual %.3e, interior min %.3e", pair.model_id, residual, lowest)
    return CheckRecord.evaluate(
        "commutator_identity",
        "i[H, A] = <H>^-2 (H')^2 <H>^-2",
        residual,
        tolerance,
        model=pair.model_id,
        interior_min_eigenvalue=lowest,
        positive=lowest >= -1e-10 * max(scale, 1e-300),
    )


def _bracket_inf(lo: float, hi: float) -> float:
    """inf_{μ ∈ (lo, hi)} ⟨μ⟩^{-4}"""
    top = max(lo * lo, hi * hi)
    return (1.0 + top) ** -2


@dataclass(frozen=True)
class InteriorMinimum:
    """interior 에 머무는 창 방향들 위 i[H, A] 의 최소 Rayleigh 몫"""

    lowest: float
    leak: float  # 채택한 방향들의 최대 interior 밖 질량
    directions: int


def interior_minimum(gram: np.ndarray, form: np.ndarray, leak_tol: Optional[float] = None) -> Optional[InteriorMinimum]:
    """
    창 벡터 v 중 ‖(1-P)v‖² ≤ leak_tol 인 방향들에서 ⟨Pv, i[H,A] Pv⟩ / ‖Pv‖² 의 최소값

    그런 방향이 없으면 interior 질량이 가장 큰 한 방향을 쓰고,
    그 질량이 INTERIOR_FLOOR 미만이면 None 을 돌려줍니다.
    """
    leak_tol = settings.MOURRE_LEAK_TOL if leak_tol is None else leak_tol
    if gram.size == 0:
        return None
    mass, coeffs = scipy.linalg.eigh(gram)
    keep = mass >= 1.0 - leak_tol
    if not np.any(keep):
        if mass[-1] < settings.INTERIOR_FLOOR:
            return None
        keep = np.arange(mass.size) == mass.size - 1
    scaled = coeffs[:, keep] / np.sqrt(mass[keep])
    reduced = scaled.conj().T @ form @ scaled
    lowest = float(scipy.linalg.eigvalsh(0.5 * (reduced + reduced.conj().T))[0])
    return InteriorMinimum(lowest=lowest, leak=float(max(1.0 - mass[keep].min(), 0.0)), directions=int(keep.sum()))


def leak_slack(leak: float, weight_max: float) -> float:
    """interior 밖 질량 leak 인 방향에서 Rayleigh 몫이 창 하한 아래로 내려갈 수 있는 최대 폭"""
    if leak <= 0.0:
        return 0.0
    return 2.0 * math.sqrt(leak) * weight_max / (1.0 - leak)


@dataclass(frozen=True)
class MourreWindowResult:
    center: float
    delta: float
    a_measured: float
    a_predicted: float
    positivity_floor: float
    states: int
    directions: int
    interior_leak: float
    slack: float

    @property
    def passed(self) -> bool:
        return self.a_measured >= self.a_predicted - 1e-8 - self.slack

    @property
    def strictly_positive(self) -> bool:
        return self.a_measured > self.positivity_floor

    def record(self, expect_positive: bool = True) -> CheckRecord:
        if expect_positive:
            return CheckRecord.evaluate(
                "mourre_window",
                "E(l;d) i[H,A] E(l;d) >= a' E(l;d)",
                max(self.a_predicted - self.a_measured, 0.0),
                1e-8 + self.slack,
                center=self.center,
                delta=self.delta,
                a_measured=self.a_measured,
                a_predicted=self.a_predicted,
                interior_leak=self.interior_leak,
                directions=self.directions,
            )
        # κ 점 중심 창: 양정치성 부족분이 0 보다 커야 통과
        return CheckRecord.evaluate(
            "mourre_window.kappa",
            "E(l;d) i[H,A] E(l;d) >= a E(l;d) with a > 0 fails at critical values",
            max(self.positivity_floor - self.a_measured, 0.0),
            0.0,
            expected_failure=True,
            center=self.center,
            delta=self.delta,
            a_measured=self.a_measured,
            positivity_floor=self.positivity_floor,
        )


def mourre_window(
    data: ConjugateOperatorData,
    spectral: JointSpectralData,
    center: float,
    delta: float,
    positivity_floor: Optional[float] = None,
) -> MourreWindowResult:
    """
    창 (center - delta, center + delta) 에서의 Mourre 상수

    a_measured 는 행렬 i[H, A] 를 interior 에 머무는 창 방향들로 압축한 최소 고유값,
    a_predicted 는 min (H')² × inf⟨μ⟩^{-4} 입니다. 채택한 방향의 interior 밖 질량만큼
    a_predicted 아래로 허용 폭 (slack) 을 둡니다.

    Raises:
        EmptyWindow: 창 안에 H 고유값이 없거나 창 벡터의 interior 질량이 INTERIOR_FLOOR 미만
    """
    forms = data.window_forms(spectral)
    window = forms.window(center, delta)
    if window.stop == window.start:
        raise EmptyWindow(detail=f"no eigenvalue in ({center - delta:.6g}, {center + delta:.6g})")
    found = interior_minimum(forms.gram[window, window], forms.form[window, window])
    if found is None:
        raise EmptyWindow(detail=f"no interior weight in ({center - delta:.6g}, {center + delta:.6g})")
    weight_max = float(forms.weight[window].max())
    a_predicted = float(forms.sq[window].min()) * _bracket_inf(center - delta, center + delta)
    if positivity_floor is None:
        positivity_floor = settings.MOURRE_FLOOR_REL * weight_max
    result = MourreWindowResult(
        center=float(center),
        delta=float(delta),
        a_measured=found.lowest,
        a_predicted=a_predicted,
        positivity_floor=float(positivity_floor),
        states=window.stop - window.start,
        directions=found.directions,
        interior_leak=found.leak,
        slack=leak_slack(found.leak, weight_max),
    )
    logger.debug(
        "mourre_window(%.6g, %.3g): a=%.3e predicted=%.3e over %d/%d directions (leak %.2e)",
        center,
        delta,
        result.a_measured,
        a_predicted,
        found.directions,
        result.states,
        found.leak,
    )
    return result


def kappa_a_scan(
    data: ConjugateOperatorData,
    spectral: JointSpectralData,
    delta: Optional[float] = None,
    threshold: Optional[float] = None,
) -> CriticalSetEstimate:
    """
    A-정칙이 아닌 값들의 집합 κ^A(H)

    H 의 고유값 클러스터마다 반폭 delta 창을 두고, 행렬 i[H, A] 의 interior 창 최소값을
    창 안 최대 ⟨λ⟩^{-4}(H')² 로 나눈 비가 threshold (기본 MOURRE_FLOOR_REL) 이하인
    창의 중심을 모읍니다. interior 질량이 모자라는 창은 건너뜁니다.
    """
    forms = data.window_forms(spectral)
    lam = forms.lam
    diameter = float(lam.max() - lam.min()) if lam.size else 0.0
    if delta is None:
        delta = settings.KAPPA_DELTA_FRACTION * (diameter if diameter > 0 else 1.0)
    if threshold is None:
        threshold = settings.MOURRE_FLOOR_REL
    weight = forms.weight
    gap = 2.0 * settings.CLUSTER_REL_GAP * max(diameter, 1.0)

    centers: List[float] = []
    ratios: List[float] = []
    skipped = 0
    for a, b in split_clusters(lam, gap):
        center = float(np.mean(lam[a:b]))
        window = forms.window(center, delta)
        found = interior_minimum(forms.gram[window, window], forms.form[window, window])
        if found is None:
            skipped += 1
            continue
        top = float(weight[window].max())
        ratio = found.lowest / top if top > 0 else 0.0
        if ratio <= threshold:
            centers.append(center)
            ratios.append(ratio)
    points: List[CriticalPoint] = merge_critical_points(np.array(centers), np.array(ratios), delta) if centers else []
    logger.info(
        "kappa_a_scan: %d critical windows (%d without interior weight) -> %s",
        len(centers),
        skipped,
        [round(p.lam, 6) for p in points],
    )
    return CriticalSetEstimate(points=points, threshold=float(threshold), delta=float(delta), method="mourre")
