"""
스펙트럼 분석: 임계 집합 κ(H), 필터링된 상태, 핵 분해 K ⊕ G

κ 는 창 안에서 (H')² 의 최솟값이 문턱값 아래로 떨어지는 점들로 추정합니다.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from app.core.config import settings
from app.core.exceptions import (
    BadDimension,
    FilteredToZero,
    FilterHitsKappa,
    NotJointlyDiagonalized,
    NotReduced,
)
from app.services.commutators import DerivedOperators
from app.services.linalg import (
    HermitianOperator,
    JointSpectralData,
    SpectralFilter,
    apply_function_to,
    joint_diagonalize,
    operator_norm,
)
from app.services.model_catalog import ExactChain, OperatorPair, SymbolData, interior_subspace, validate_pair

logger = logging.getLogger(__name__)

# κ 점 중복 제거 간격 (심볼 경로, 값 스케일 대비)
_SYMBOLIC_DEDUPE = 1e-6


@dataclass(frozen=True)
class CriticalPoint:
    lam: float
    hprime_sq_min: float


@dataclass
class CriticalSetEstimate:
    points: List[CriticalPoint]
    threshold: float
    delta: float
    method: str  # joint_spectral | symbolic | mourre

    @property
    def values(self) -> List[float]:
        return [p.lam for p in self.points]

    def contains(self, lam: float, tol: Optional[float] = None) -> bool:
        tol = self.delta if tol is None else tol
        return any(abs(p.lam - lam) <= tol for p in self.points)

    def matches(self, other: "CriticalSetEstimate", tol: Optional[float] = None) -> bool:
        """두 추정이 tol 안에서 같은 점 집합인지"""
        tol = max(self.delta, other.delta) if tol is None else tol
        return all(other.contains(p, tol) for p in self.values) and all(self.contains(p, tol) for p in other.values)


# ========== 동시 스펙트럼 데이터 ==========

def joint_from_symbol(pair: OperatorPair) -> JointSpectralData:
    """푸리에 기저에서 H, H'_j 를 동시에 대각화한 정확한 스펙트럼 데이터"""
    sym = pair.exact
    if sym is None:
        raise NotJointlyDiagonalized(detail=f"{pair.model_id} has no symbol data")
    table = np.column_stack([sym.values] + [sym.gradient[:, j] for j in range(pair.d)])
    labels = ["H"] + [f"H'_{j + 1}" for j in range(pair.d)]
    return JointSpectralData(basis=sym.basis, eigenvalue_table=table, family_labels=labels)


def joint_spectral(pair: OperatorPair, derived: DerivedOperators, *, seed: Optional[int] = None) -> JointSpectralData:
    """{H, H'_1..H'_d} 의 동시 고유기저 (심볼이 있으면 정확한 푸리에 기저)"""
    if pair.exact is not None:
        return joint_from_symbol(pair)
    family = [HermitianOperator(pair.H.entries, "H")] + [
        HermitianOperator(h.entries, f"H'_{j + 1}") for j, h in enumerate(derived.hp)
    ]
    data = joint_diagonalize(family, seed=seed)
    logger.info("joint_spectral[%s]: dim=%d unitarity defect %.2e", pair.model_id, data.dim, data.unitarity_defect())
    return data


def hprime_columns(spectral: JointSpectralData) -> np.ndarray:
    """H'_j 고유값 열 (n, d)"""
    cols = [k for k, label in enumerate(spectral.family_labels) if label.startswith("H'_")]
    if not spectral.has("H") or not cols:
        raise NotJointlyDiagonalized(detail=f"family {spectral.family_labels} lacks H or H'_j")
    return spectral.eigenvalue_table[:, cols]


# ========== κ(H) ==========

def merge_critical_points(lam: np.ndarray, score: np.ndarray, delta: float) -> List[CriticalPoint]:
    order = np.argsort(lam, kind="stable")
    lam, score = lam[order], score[order]
    points: List[CriticalPoint] = []
    start = 0
    for i in range(1, lam.size + 1):
        if i == lam.size or lam[i] - lam[i - 1] > delta:
            group = slice(start, i)
            best = start + int(np.argmin(score[group]))
            points.append(CriticalPoint(lam=float(lam[best]), hprime_sq_min=float(score[best])))
            start = i
    return points


def kappa_estimate(
    spectral: JointSpectralData,
    delta: Optional[float] = None,
    threshold: Optional[float] = None,
) -> CriticalSetEstimate:
    """
    임계 집합 κ(H) 추정

    H 값 λ 의 δ-창 안에 Σ_j λ'_j² ≤ threshold 인 동시 고유벡터가 있으면 λ 는 임계입니다.
    문턱 아래 벡터들을 δ 안에서 병합하고, (H')² 가 가장 작은 벡터의 H 값으로 대표합니다.

    Args:
        spectral: {H, H'_j} 의 동시 스펙트럼 데이터
        delta: 창 반폭 (기본: 스펙트럼 지름 × KAPPA_DELTA_FRACTION)
        threshold: 문턱값 (기본: KAPPA_THRESHOLD_REL × ‖(H')²‖)

    Raises:
        NotJointlyDiagonalized: H 또는 H'_j 가 스펙트럼 데이터에 없음
    """
    hp = hprime_columns(spectral)
    lam = spectral.values("H")
    sq = np.sum(hp**2, axis=1)
    diameter = float(lam.max() - lam.min()) if lam.size else 0.0
    if delta is None:
        delta = settings.KAPPA_DELTA_FRACTION * (diameter if diameter > 0 else 1.0)
    if threshold is None:
        threshold = settings.KAPPA_THRESHOLD_REL * float(sq.max(initial=0.0))
    below = sq <= threshold
    points = merge_critical_points(lam[below], sq[below], delta) if np.any(below) else []
    logger.info(
        "kappa_estimate: %d/%d sub-threshold vectors -> %s (delta=%.3g, threshold=%.3g)",
        int(below.sum()),
        lam.size,
        [round(p.lam, 6) for p in points],
        delta,
        threshold,
    )
    return CriticalSetEstimate(points=points, threshold=float(threshold), delta=float(delta), method="joint_spectral")


def _symbol_grid(symbol: SymbolData, resolution: int) -> Tuple[List[np.ndarray], np.ndarray]:
    lo, hi = symbol.domain
    if symbol.periodic:
        axis = np.linspace(lo, hi, resolution, endpoint=False)
    else:
        axis = np.linspace(lo, hi, resolution | 1)
    axes = [axis] * symbol.dimension
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    return axes, points


def kappa_symbolic(symbol: SymbolData, grid_resolution: int = 256, newton_steps: int = 60) -> CriticalSetEstimate:
    """
    심볼 m 의 임계값 {m(ξ) | ∇m(ξ) = 0}

    격자에서 |∇m|² 의 국소 최솟값을 찾고, 각 후보에서 ∇m = 0 을 Newton 으로 정제합니다.
    가지별 상수(offsets) 를 더해 모든 가지의 임계값을 돌려줍니다.
    """
    axes, points = _symbol_grid(symbol, grid_resolution)
    shape = tuple(a.size for a in axes)
    m, grad, _ = symbol.evaluate(points)
    score = np.sum(grad**2, axis=1)
    scale = max(float(score.max(initial=0.0)), 1e-300)
    value_scale = max(float(np.max(np.abs(m))), 1.0)

    if float(score.max(initial=0.0)) <= 1e-24:
        # 상수 심볼: 모든 점이 임계
        base = float(np.mean(m))
        pts = [CriticalPoint(lam=base + off, hprime_sq_min=0.0) for off in sorted(set(symbol.offsets))]
        return CriticalSetEstimate(points=pts, threshold=0.0, delta=_SYMBOLIC_DEDUPE * value_scale, method="symbolic")

    grid_score = score.reshape(shape)
    local_min = np.ones(shape, dtype=bool)
    for axis in range(symbol.dimension):
        for shift in (1, -1):
            neighbour = np.roll(grid_score, shift, axis=axis)
            if not symbol.periodic:
                edge = [slice(None)] * symbol.dimension
                edge[axis] = 0 if shift == 1 else -1
                neighbour[tuple(edge)] = np.inf
            local_min &= grid_score <= neighbour
    candidates = points[local_min.ravel()]

    accept = 1e-18 * scale
    found: List[Tuple[float, float]] = []
    lo, hi = symbol.domain
    for xi in candidates:
        x = xi.copy()
        for _ in range(newton_steps):
            _, g, h = symbol.evaluate(x[None, :])
            g, h = g[0], h[0]
            if float(g @ g) <= accept:
                break
            step, *_ = np.linalg.lstsq(h, g, rcond=None)
            x = x - step
        if not symbol.periodic and np.any((x < lo) | (x > hi)):
            continue
        value, g, _ = symbol.evaluate(x[None, :])
        if float(g[0] @ g[0]) <= accept:
            found.append((float(value[0]), float(g[0] @ g[0])))

    delta = _SYMBOLIC_DEDUPE * value_scale
    pts: List[CriticalPoint] = []
    for off in symbol.offsets:
        pts.extend(CriticalPoint(lam=v + off, hprime_sq_min=s) for v, s in found)
    merged = merge_critical_points(np.array([p.lam for p in pts]), np.array([p.hprime_sq_min for p in pts]), delta) if pts else []
    logger.info("kappa_symbolic: %d grid candidates -> %s", len(candidates), [round(p.lam, 8) for p in merged])
    return CriticalSetEstimate(points=merged, threshold=accept, delta=delta, method="symbolic")


# ========== 상태 ==========

def _coordinates(pair: OperatorPair) -> np.ndarray:
    """가우스 묶음 좌표 (Φ 가 대각이 아니면 기저 인덱스)"""
    if pair.phi_diagonal:
        return pair.positions()
    return np.arange(pair.dim, dtype=float)[:, None]


def gaussian_packet(
    pair: OperatorPair,
    center: Sequence[float] | float = 0.0,
    width: float = 4.0,
    momentum: Sequence[float] | float = 0.0,
    mode: Optional[int] = None,
) -> np.ndarray:
    """
    exp(-|x - c|²/(2w²) + i k·x), 정규화

    mode 는 도파관 모델의 횡방향 모드 (0 부터) 를 고릅니다.
    """
    coords = _coordinates(pair)
    c = np.broadcast_to(np.asarray(center, dtype=float), (coords.shape[1],))
    k = np.broadcast_to(np.asarray(momentum, dtype=float), (coords.shape[1],))
    if width <= 0:
        raise BadDimension(detail=f"packet width must be > 0, got {width}")
    shifted = coords - c[None, :]
    packet = np.exp(-np.sum(shifted**2, axis=1) / (2.0 * width**2) + 1j * (coords @ k))
    if mode is not None:
        modes = int(pair.params.get("modes", 1))
        if not 0 <= mode < modes:
            raise BadDimension(detail=f"mode {mode} out of range 0..{modes - 1}")
        block = pair.dim // modes
        packet[np.arange(pair.dim) // block != mode] = 0.0
    norm = float(np.linalg.norm(packet))
    if norm == 0.0:
        raise FilteredToZero(detail="packet vanishes on the grid")
    return packet / norm


def basis_state(pair: OperatorPair, index: int) -> np.ndarray:
    if not 0 <= index < pair.dim:
        raise BadDimension(detail=f"basis index {index} out of range")
    out = np.zeros(pair.dim, dtype=complex)
    out[index] = 1.0
    return out


def phi_weight(pair: OperatorPair, vector: np.ndarray, power: float) -> float:
    """‖⟨Φ⟩^t φ‖, ⟨Φ⟩² = 1 + Σ Φ_j²"""
    if pair.phi_diagonal:
        weight = (1.0 + np.sum(pair.positions() ** 2, axis=1)) ** (power / 2.0)
        return float(np.linalg.norm(weight * vector))
    square = sum(p.entries @ p.entries for p in pair.Phi)
    evals, W = scipy.linalg.eigh(0.5 * (square + square.conj().T))
    coeffs = W.conj().T @ vector
    return float(np.linalg.norm((1.0 + np.maximum(evals, 0.0)) ** (power / 2.0) * coeffs))


@dataclass
class FilteredState:
    """η(H) 로 필터링된 정규화 상태 (D_t 대용)"""

    vector: np.ndarray
    interior_mass: float
    phi_weight_norm: float
    weight_power: float
    spectral_filter: SpectralFilter
    localized: bool = True
    diagnostics: dict = field(default_factory=dict)


def localisation_summary(states: Sequence[FilteredState]) -> Dict[str, Any]:
    """검사 기록에 붙일 interior 질량 요약 (min_interior_mass, unlocalized_states)"""
    return {
        "min_interior_mass": min((s.interior_mass for s in states), default=1.0),
        "unlocalized_states": sum(1 for s in states if not s.localized),
    }


def check_filter_against_kappa(spectral_filter: SpectralFilter, kappa: CriticalSetEstimate) -> None:
    """
    Raises:
        FilterHitsKappa: κ 점과 필터 지지의 거리가 margin 미만
    """
    lo, hi = spectral_filter.support
    for lam in kappa.values:
        distance = max(lo - lam, lam - hi, 0.0)
        if distance < spectral_filter.margin:
            raise FilterHitsKappa(detail=f"kappa point {lam:.6g} at distance {distance:.3g} from support [{lo:.6g}, {hi:.6g}]")


def make_Dt_state(
    pair: OperatorPair,
    spectral: JointSpectralData,
    kappa: CriticalSetEstimate,
    spectral_filter: SpectralFilter,
    seed_state: np.ndarray,
    weight_power: float = 2.0,
    min_interior_mass: float = 0.99,
) -> FilteredState:
    """
    η(H)·seed 정규화

    Raises:
        FilterHitsKappa: 필터 지지가 κ 점에 닿음
        FilteredToZero: 필터가 seed 를 소멸시킴
    """
    check_filter_against_kappa(spectral_filter, kappa)
    seed = np.asarray(seed_state, dtype=complex)
    seed_norm = float(np.linalg.norm(seed))
    if seed_norm == 0.0:
        raise FilteredToZero(detail="seed state is zero")
    filtered = apply_function_to(spectral, ["H"], spectral_filter.evaluate, seed)
    norm = float(np.linalg.norm(filtered))
    if norm <= 1e-12 * seed_norm:
        raise FilteredToZero(detail=f"‖η(H)seed‖ / ‖seed‖ = {norm / seed_norm:.3e}")
    vector = filtered / norm
    mass = interior_subspace(pair).mass(vector)
    localized = mass >= min_interior_mass
    if not localized:
        logger.warning("make_Dt_state[%s]: interior mass %.4f < %.2f", pair.model_id, mass, min_interior_mass)
    return FilteredState(
        vector=vector,
        interior_mass=mass,
        phi_weight_norm=phi_weight(pair, vector, weight_power),
        weight_power=weight_power,
        spectral_filter=spectral_filter,
        localized=localized,
        diagnostics={"retained_fraction": norm / seed_norm},
    )


# ========== K ⊕ G ==========

@dataclass(frozen=True, eq=False)
class KernelSplit:
    K_basis: np.ndarray
    G_basis: np.ndarray
    tolerance: float

    @property
    def kernel_dim(self) -> int:
        return int(self.K_basis.shape[1])

    def orthogonality_defect(self) -> float:
        if self.K_basis.shape[1] == 0 or self.G_basis.shape[1] == 0:
            return 0.0
        return float(np.max(np.abs(self.G_basis.conj().T @ self.K_basis)))


def kernel_split(spectral: JointSpectralData, tolerance: Optional[float] = None) -> KernelSplit:
    """
    ker((H')²) 와 그 직교 여공간

    (H')² 고유값이 tolerance × max 이하인 동시 고유벡터가 K 입니다.
    """
    tol = settings.KAPPA_THRESHOLD_REL if tolerance is None else tolerance
    sq = np.sum(hprime_columns(spectral) ** 2, axis=1)
    top = float(sq.max(initial=0.0))
    in_kernel = sq <= tol * top
    split = KernelSplit(
        K_basis=spectral.basis[:, in_kernel],
        G_basis=spectral.basis[:, ~in_kernel],
        tolerance=tol,
    )
    logger.info("kernel_split: dim K = %d, dim G = %d", split.kernel_dim, split.G_basis.shape[1])
    return split


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """열마다 절댓값이 가장 큰 성분을 양의 실수로"""
    pivots = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])]
    return vectors * (np.abs(pivots) / pivots)[None, :]


def reduced_pair(pair: OperatorPair, derived: DerivedOperators, split: KernelSplit) -> OperatorPair:
    """
    G 로 환원한 모델

    G 는 압축된 Φ 의 고유벡터로 회전하여 환원된 Φ 가 대각이 되게 합니다.
    H', H'', H''' 는 정확한 사슬로 함께 압축됩니다.

    Raises:
        NotReduced: ‖K* H G‖ > 1e-8 ‖H‖
        BadDimension: G 가 비어 있음
    """
    if split.kernel_dim == 0:
        return pair
    G, K = split.G_basis, split.K_basis
    if G.shape[1] == 0:
        raise BadDimension(detail="G is empty; nothing to reduce to")
    H = pair.H.entries
    h_norm = pair.H.norm()
    off_h = operator_norm(K.conj().T @ H @ G)
    if off_h > 1e-8 * max(h_norm, 1e-300):
        raise NotReduced(detail=f"H off-block {off_h:.3e} (‖H‖={h_norm:.3e})")
    off_phi = max(operator_norm(K.conj().T @ p.entries @ G) / max(p.norm(), 1e-300) for p in pair.Phi)
    phi_reduced = off_phi <= 1e-8
    if not phi_reduced:
        logger.warning("reduced_pair[%s]: Phi not reduced (off-block %.3e)", pair.model_id, off_phi)

    compressed_phi = [G.conj().T @ p.entries @ G for p in pair.Phi]
    if pair.d == 1:
        theta, W = scipy.linalg.eigh(0.5 * (compressed_phi[0] + compressed_phi[0].conj().T))
        thetas = [theta]
    else:
        joint = joint_diagonalize([HermitianOperator.from_matrix(c, f"Phi_{j + 1}", tol=1e-8) for j, c in enumerate(compressed_phi)])
        W = joint.basis
        thetas = [joint.eigenvalue_table[:, j] for j in range(pair.d)]
    basis = _fix_phases(G @ W)

    def compress(m: np.ndarray) -> np.ndarray:
        out = basis.conj().T @ m @ basis
        return 0.5 * (out + out.conj().T)

    d = pair.d
    chain = ExactChain(
        hp=[compress(h.entries) for h in derived.hp],
        hpp=[[compress(derived.hpp[j][k].entries) for k in range(d)] for j in range(d)] if derived.hpp else [],
        hppp=(
            [[[compress(derived.hppp[j][k][l].entries) for l in range(d)] for k in range(d)] for j in range(d)]
            if derived.hppp is not None
            else None
        ),
    )
    weights = np.abs(basis) ** 2
    sub = interior_subspace(pair)
    interior_weight = np.array([sub.mass(basis[:, n]) for n in range(basis.shape[1])])
    support = weights > 1e-12
    seam = np.array([float(np.min(pair.seam_distance[support[:, n]])) for n in range(basis.shape[1])])
    reduced = OperatorPair(
        model_id=f"{pair.model_id}_reduced",
        H=HermitianOperator.from_matrix(compress(H), "H", tol=1e-10),
        Phi=[HermitianOperator(entries=np.diag(t).astype(complex), label=f"Phi_{j + 1}") for j, t in enumerate(thetas)],
        interior_mask=interior_weight >= 1.0 - 1e-8,
        seam_distance=seam,
        chain=chain,
        params={**pair.params, "reduced_from": pair.model_id, "kernel_dim": split.kernel_dim},
        phi_reduced=phi_reduced,
    )
    reduced.cache["embedding"] = basis
    validate_pair(reduced)
    logger.info("reduced_pair[%s]: dim %d -> %d, phi_reduced=%s", pair.model_id, pair.dim, reduced.dim, phi_reduced)
    return reduced
