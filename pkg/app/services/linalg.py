"""
에르미트 행렬 기본 연산

모든 수치 모듈이 공유하는 기반 계층입니다.

- HermitianOperator: H, Φ_j, H'_j, A, T_f 를 담는 조밀 복소 에르미트 행렬
- eigh / joint_diagonalize: 고유분해와 가환 연산자 족의 동시 대각화
- apply_function / filter_matrix: 동시 고유기저 위의 함수 계산법
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from app.core.config import settings
from app.core.exceptions import (
    BadDimension,
    DegeneracyUnresolved,
    DomainError,
    NonHermitian,
    NotCommuting,
)
from app.utils.smoothstep import smoothstep

logger = logging.getLogger(__name__)

OperatorRef = Union[int, str]


def hermiticity_defect(matrix: np.ndarray) -> float:
    """max|A - A*| / max|A| (영행렬이면 절대값)"""
    m = np.asarray(matrix)
    defect = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    return defect / scale if scale > 0 else defect


def operator_norm(matrix: np.ndarray, iterations: int = 80) -> float:
    """
    스펙트럴 노름 ‖A‖₂

    작은 행렬은 정확한 SVD, 큰 행렬은 고정 시작 벡터의 거듭제곱 반복으로 추정합니다
    (결정적이며 허용 오차 스케일링에 충분한 정밀도).
    """
    m = np.asarray(matrix)
    if m.size == 0:
        return 0.0
    if m.shape[0] <= 256:
        return float(np.linalg.norm(m, 2))
    v = np.ones(m.shape[1], dtype=complex) / np.sqrt(m.shape[1])
    estimate = 0.0
    for _ in range(iterations):
        w = m.conj().T @ (m @ v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        estimate = np.sqrt(nw)
    return float(estimate)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """조밀 복소 에르미트 행렬 (dim × dim)"""

    entries: np.ndarray
    label: str = ""

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @classmethod
    def from_matrix(
        cls,
        matrix: np.ndarray,
        label: str = "",
        *,
        tol: Optional[float] = None,
    ) -> "HermitianOperator":
        """
        행렬을 검증하고 대칭화하여 HermitianOperator 생성

        Raises:
            BadDimension: 정사각 행렬이 아니거나 dim < 1
            NonHermitian: 비대칭도가 tol (상대) 초과
        """
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise BadDimension(detail=f"{label or 'operator'}: shape={m.shape}")
        tol = settings.HERMITICITY_TOL if tol is None else tol
        defect = hermiticity_defect(m)
        if defect > tol:
            raise NonHermitian(detail=f"{label or 'operator'}: max asymmetry {defect:.3e} > {tol:.1e}")
        return cls(entries=0.5 * (m + m.conj().T), label=label)

    def norm(self) -> float:
        return operator_norm(self.entries)


@dataclass(frozen=True)
class SpectralFilter:
    """
    스펙트럴 필터 η

    [center - half_width, center + half_width] 에서 1,
    margin 만큼 확장한 구간 밖에서 0, 그 사이는 smoothstep 전이.
    """

    center: float
    half_width: float
    margin: float
    order: int = 5

    def __post_init__(self) -> None:
        if self.half_width < 0 or self.margin <= 0:
            raise ValueError("half_width must be >= 0 and margin > 0")
        if self.order < 3:
            raise ValueError("smoothstep order must be >= 3")

    @property
    def support(self) -> Tuple[float, float]:
        reach = self.half_width + self.margin
        return self.center - reach, self.center + reach

    def evaluate(self, lam: np.ndarray) -> np.ndarray:
        distance = np.abs(np.asarray(lam, dtype=float) - self.center)
        return 1.0 - smoothstep((distance - self.half_width) / self.margin, self.order)


@dataclass(frozen=True, eq=False)
class JointSpectralData:
    """가환 에르미트 족의 공통 정규직교 고유기저와 고유값 표"""

    basis: np.ndarray
    eigenvalue_table: np.ndarray  # (n_vectors, n_operators)
    family_labels: List[str] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])

    def index(self, ref: OperatorRef) -> int:
        if isinstance(ref, (int, np.integer)):
            if not 0 <= int(ref) < self.eigenvalue_table.shape[1]:
                raise KeyError(f"operator index {ref} out of range")
            return int(ref)
        try:
            return self.family_labels.index(ref)
        except ValueError:
            raise KeyError(f"operator '{ref}' not in {self.family_labels}") from None

    def values(self, ref: OperatorRef) -> np.ndarray:
        return self.eigenvalue_table[:, self.index(ref)]

    def has(self, ref: OperatorRef) -> bool:
        try:
            self.index(ref)
        except KeyError:
            return False
        return True

    def unitarity_defect(self) -> float:
        u = self.basis
        return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))

    def coefficients(self, vector: np.ndarray) -> np.ndarray:
        """U* v (고유기저 성분)"""
        return self.basis.conj().T @ vector

    def synthesize(self, coefficients: np.ndarray) -> np.ndarray:
        return self.basis @ coefficients


def eigh(op: HermitianOperator) -> Tuple[np.ndarray, np.ndarray]:
    """
    에르미트 고유분해

    Returns:
        (오름차순 고유값, 유니터리 기저)

    Raises:
        NonHermitian: 비대칭도가 허용 오차 초과
    """
    defect = hermiticity_defect(op.entries)
    if defect > settings.HERMITICITY_TOL:
        raise NonHermitian(detail=f"{op.label}: max asymmetry {defect:.3e}")
    evals, basis = scipy.linalg.eigh(op.entries)
    return evals, basis


def split_clusters(evals: np.ndarray, gap: float) -> List[Tuple[int, int]]:
    clusters: List[Tuple[int, int]] = []
    start = 0
    for i in range(1, len(evals) + 1):
        if i == len(evals) or evals[i] - evals[i - 1] > gap:
            clusters.append((start, i))
            start = i
    return clusters


def _refine_cluster(ops: Sequence[np.ndarray], block: np.ndarray, start: int, gap: float) -> np.ndarray:
    """축퇴 클러스터 안에서 남은 연산자를 차례로 대각화 (재귀)"""
    for k in range(start, len(ops)):
        compressed = block.conj().T @ ops[k] @ block
        compressed = 0.5 * (compressed + compressed.conj().T)
        evals, vecs = scipy.linalg.eigh(compressed)
        if evals[-1] - evals[0] <= gap:
            continue
        block = block @ vecs
        for a, b in split_clusters(evals, gap):
            if b - a > 1:
                block[:, a:b] = _refine_cluster(ops, block[:, a:b], k + 1, gap)
        return block
    return block


def joint_diagonalize(
    family: Sequence[HermitianOperator],
    comm_tol: Optional[float] = None,
    *,
    seed: Optional[int] = None,
    joint_tol: Optional[float] = None,
) -> JointSpectralData:
    """
    가환 에르미트 족의 동시 대각화

    시드 고정 난수 계수의 선형결합을 대각화한 뒤, 축퇴 클러스터마다
    남은 연산자를 클러스터 부분공간에서 재귀적으로 대각화합니다.

    Args:
        family: 가환 연산자 목록
        comm_tol: 상대 교환자 허용치 ‖[A,B]‖ ≤ comm_tol·‖A‖·‖B‖
        seed: 선형결합 계수 난수 시드 (기본 settings.DEFAULT_SEED)
        joint_tol: ‖O u - λ u‖ ≤ joint_tol·‖O‖ 허용치

    Raises:
        NotCommuting: 가환 조건 위반 (위반 쌍과 잔차)
        DegeneracyUnresolved: 정제 후에도 joint_tol 미달
    """
    ops = list(family)
    if not ops:
        raise BadDimension(detail="empty family")
    dim = ops[0].dim
    if any(o.dim != dim for o in ops):
        raise BadDimension(detail=f"family dims {[o.dim for o in ops]}")
    comm_tol = settings.COMM_TOL if comm_tol is None else comm_tol
    joint_tol = settings.JOINT_TOL if joint_tol is None else joint_tol
    seed = settings.DEFAULT_SEED if seed is None else seed

    norms = [o.norm() for o in ops]
    for j in range(len(ops)):
        for k in range(j + 1, len(ops)):
            if norms[j] == 0.0 or norms[k] == 0.0:
                continue
            residual = operator_norm(commutator(ops[j].entries, ops[k].entries)) / (norms[j] * norms[k])
            if residual > comm_tol:
                raise NotCommuting(
                    detail=f"[{ops[j].label or j}, {ops[k].label or k}] residual {residual:.3e} > {comm_tol:.1e}"
                )

    scaled = [o.entries / n if n > 0 else o.entries for o, n in zip(ops, norms)]
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(0.5, 1.5, size=len(ops))
    combo = sum(c * m for c, m in zip(coeffs, scaled))
    combo = 0.5 * (combo + combo.conj().T)
    evals, basis = scipy.linalg.eigh(combo)

    diameter = max(float(evals[-1] - evals[0]), 1.0)
    gap = settings.CLUSTER_REL_GAP * diameter
    n_refined = 0
    for a, b in split_clusters(evals, gap):
        if b - a > 1:
            basis[:, a:b] = _refine_cluster(scaled, basis[:, a:b], 0, gap)
            n_refined += 1
    logger.debug("joint_diagonalize: dim=%d ops=%d refined clusters=%d", dim, len(ops), n_refined)

    table = np.empty((dim, len(ops)))
    for k, op in enumerate(ops):
        applied = op.entries @ basis
        lam = np.real(np.einsum("ij,ij->j", basis.conj(), applied))
        table[:, k] = lam
        residual = np.linalg.norm(applied - basis * lam, axis=0)
        worst = float(np.max(residual)) if residual.size else 0.0
        if worst > joint_tol * max(norms[k], 1e-300):
            raise DegeneracyUnresolved(
                detail=f"{op.label or k}: max ‖O u - λ u‖ = {worst:.3e} (‖O‖={norms[k]:.3e})"
            )
    labels = [o.label or f"op{k}" for k, o in enumerate(ops)]
    return JointSpectralData(basis=basis, eigenvalue_table=table, family_labels=labels)


def evaluate_on_table(
    data: JointSpectralData,
    which: Sequence[OperatorRef],
    g: Callable[..., np.ndarray],
    restrict: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    고유값 튜플 위에서 g 를 평가 (restrict 밖의 열은 0)

    g 는 선택된 연산자마다 하나의 (n,) 배열을 받는 벡터화 함수입니다.

    Raises:
        DomainError: 유한하지 않은 값 (해당 튜플 보고)
    """
    cols = [data.values(ref) for ref in which]
    n = data.basis.shape[1]
    mask = np.ones(n, dtype=bool) if restrict is None else np.asarray(restrict, dtype=bool)
    values = np.zeros(n, dtype=complex)
    if mask.any():
        evaluated = np.broadcast_to(np.asarray(g(*[c[mask] for c in cols]), dtype=complex), (int(mask.sum()),))
        values[mask] = evaluated
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DomainError(detail=f"non-finite at eigenvalue tuple {tuple(float(c[i]) for c in cols)}")
    return values


def apply_function(
    data: JointSpectralData,
    which: Sequence[OperatorRef],
    g: Callable[..., np.ndarray],
    restrict: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    함수 계산법 U diag(g(λ_i)) U*

    g 가 실수값이면 결과를 대칭화하여 정확히 에르미트로 만듭니다.
    """
    values = evaluate_on_table(data, which, g, restrict)
    u = data.basis
    out = (u * values) @ u.conj().T
    if np.all(np.abs(values.imag) == 0.0):
        out = 0.5 * (out + out.conj().T)
    return out


def apply_function_to(
    data: JointSpectralData,
    which: Sequence[OperatorRef],
    g: Callable[..., np.ndarray],
    vectors: np.ndarray,
    restrict: Optional[np.ndarray] = None,
) -> np.ndarray:
    """g(O) v 를 조밀 행렬 없이 계산 (vectors 는 (dim,) 또는 (dim, k))"""
    values = evaluate_on_table(data, which, g, restrict)
    coeffs = data.coefficients(vectors)
    if coeffs.ndim == 1:
        return data.synthesize(values * coeffs)
    return data.synthesize(values[:, None] * coeffs)


def filter_matrix(data: JointSpectralData, h_index: OperatorRef, spectral_filter: SpectralFilter) -> np.ndarray:
    """η(H) 행렬"""
    out = apply_function(data, [h_index], spectral_filter.evaluate)
    logger.debug(
        "filter_matrix: idempotence defect %.3e",
        filter_idempotence_defect(data, h_index, spectral_filter),
    )
    return out


def filter_idempotence_defect(data: JointSpectralData, h_index: OperatorRef, spectral_filter: SpectralFilter) -> float:
    """‖η(H)² - η(H)‖ (전이 구간 고유값의 기여)"""
    eta = spectral_filter.evaluate(data.values(h_index))
    return float(np.max(np.abs(eta * eta - eta))) if eta.size else 0.0
