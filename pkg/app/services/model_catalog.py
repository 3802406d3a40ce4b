"""
(H, Φ) 모델 카탈로그

유한 차원으로 이산화한 모델을 생성합니다. 모든 모델은 절단 경계에서 멀리 떨어진
기저 벡터를 표시하는 interior_mask 와, 가능한 경우 정확한 교환자 사슬
(SymbolData 또는 ExactChain) 을 함께 가집니다.

- jacobi_hermite / jacobi_laguerre : ℕ 위의 삼중대각 행렬, 위쪽 벽에서 절단
- convolution_zd                   : 주기 상자 위 ℤ^d 합성곱, Φ 는 실제 위치
- friedrichs / dispersive / waveguide : 주기 격자 위의 스펙트럴 미분, Φ = Q
- adjacency                        : 레벨 그래프의 인접 행렬, Φ 는 레벨 함수
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from app.core.config import settings
from app.core.exceptions import (
    AsymmetricMeasure,
    BadDimension,
    NonFiniteSymbol,
    NotAdmissible,
    NotCommuting,
    SupportTooLargeForBox,
    UnsupportedModel,
    ZeroVelocity,
)
from app.services.graphs import GraphSpec, level_map, orientation_matrix, validate_admissible
from app.services.linalg import HermitianOperator, commutator, operator_norm
from app.utils.quadrature import richardson_central_difference

logger = logging.getLogger(__name__)

# 결맞음 묶음: 위치/운동량 격자 간격 (σ 단위)과 가장자리 여유
_PACKET_STEP = 3.0
_PACKET_EDGE = 8.0


# ========== 데이터 타입 ==========

SymbolEvaluator = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray, np.ndarray]]


@dataclass(frozen=True, eq=False)
class SymbolData:
    """
    푸리에 기저에서 대각인 모델의 심볼 m 과 도함수

    basis 의 열이 평면파이며, 열마다 m, ∇m, ∇²m, ∇³m 값을 가집니다.
    evaluate 는 임의의 운동량 점 (k, d) 에서 기본 심볼의 (m, ∇m, ∇²m) 을 계산합니다.
    offsets 는 가지별 상수 (도파관의 횡방향 에너지) 이며 m_b = offset_b + m.
    """

    dimension: int
    basis: np.ndarray
    momenta: np.ndarray  # (n, d)
    values: np.ndarray  # (n,)
    gradient: np.ndarray  # (n, d)
    hessian: np.ndarray  # (n, d, d)
    third: np.ndarray  # (n, d, d, d)
    evaluate: SymbolEvaluator
    domain: Tuple[float, float]
    periodic: bool
    offsets: Tuple[float, ...] = (0.0,)
    coefficients: Optional[Dict[Tuple[int, ...], complex]] = None

    def operator(self, diagonal: np.ndarray) -> np.ndarray:
        """U diag(values) U*"""
        u = self.basis
        out = (u * diagonal) @ u.conj().T
        return 0.5 * (out + out.conj().T)


@dataclass(frozen=True, eq=False)
class ExactChain:
    """해석적으로 알려진 H', H'', H''' (조밀 행렬)"""

    hp: List[np.ndarray]
    hpp: List[List[np.ndarray]]
    hppp: Optional[List[List[List[np.ndarray]]]] = None


@dataclass(frozen=True)
class PacketLayout:
    """연속 격자 모델의 결맞음 묶음 배치"""

    positions: np.ndarray  # 한 모드의 격자점 (N,)
    spacing: float
    box_length: float
    width: float  # 묶음 가우스 폭 σ
    modes: int = 1
    momentum_reach: float = 1.0  # H(x) 검사에서 허용하는 운동량 이동 |x|

    @property
    def nyquist(self) -> float:
        return math.pi / self.spacing


@dataclass(frozen=True, eq=False)
class GraphLayout:
    spec: GraphSpec
    levels: np.ndarray  # 정점별 레벨
    orientation: np.ndarray  # D (이음매 제외)


@dataclass(eq=False)
class OperatorPair:
    """모델 인스턴스 (H, Φ_1..Φ_d) 와 절단 메타데이터"""

    model_id: str
    H: HermitianOperator
    Phi: List[HermitianOperator]
    interior_mask: np.ndarray
    seam_distance: np.ndarray  # 기저 벡터별 절단 경계까지의 Φ-거리
    exact: Optional[SymbolData] = None
    chain: Optional[ExactChain] = None
    packets: Optional[PacketLayout] = None
    graph: Optional[GraphLayout] = None
    conjugation_mask: Optional[np.ndarray] = None
    params: Dict[str, Any] = field(default_factory=dict)
    phi_reduced: bool = True
    # Φ 고유분해 등 파생 계산 캐시
    cache: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def d(self) -> int:
        return len(self.Phi)

    @property
    def dim(self) -> int:
        return self.H.dim

    @property
    def box_extent(self) -> float:
        return float(self.params.get("box_extent", self.dim))

    @property
    def phi_diagonal(self) -> bool:
        return all(_is_diagonal(p.entries) for p in self.Phi)

    def positions(self) -> np.ndarray:
        """Φ 가 대각일 때 기저 벡터별 Φ 값 (dim, d)"""
        if not self.phi_diagonal:
            raise UnsupportedModel(detail=f"{self.model_id}: Φ is not diagonal in the model basis")
        return np.stack([np.real(np.diag(p.entries)) for p in self.Phi], axis=1)


def _is_diagonal(matrix: np.ndarray) -> bool:
    return not np.any(matrix - np.diag(np.diag(matrix)))


def validate_pair(pair: OperatorPair, floor: Optional[float] = None) -> None:
    """
    OperatorPair 불변식 검사

    Raises:
        NotCommuting: Φ_j 들이 가환이 아님
        BadDimension: interior_mask 비율이 floor 미만이거나 크기 불일치
    """
    floor = settings.INTERIOR_FLOOR if floor is None else floor
    if pair.interior_mask.shape != (pair.dim,) or pair.seam_distance.shape != (pair.dim,):
        raise BadDimension(detail=f"{pair.model_id}: mask/seam size mismatch")
    fraction = float(np.mean(pair.interior_mask))
    if fraction < floor:
        raise BadDimension(detail=f"{pair.model_id}: interior fraction {fraction:.2f} < {floor}")
    if pair.phi_diagonal:
        return
    for j in range(pair.d):
        for k in range(j + 1, pair.d):
            a, b = pair.Phi[j].entries, pair.Phi[k].entries
            scale = operator_norm(a) * operator_norm(b)
            residual = operator_norm(commutator(a, b))
            if scale > 0 and residual > 1e-12 * scale:
                raise NotCommuting(detail=f"[Φ_{j}, Φ_{k}] residual {residual / scale:.3e}")


# ========== interior 부분공간 ==========

@dataclass(frozen=True, eq=False)
class InteriorSubspace:
    """
    interior 부분공간 V (dim, k)

    indices 가 있으면 V 는 그 좌표축 벡터들이며, 행렬 곱 대신 인덱싱으로 압축합니다.
    """

    dim: int
    indices: Optional[np.ndarray] = None
    vectors: Optional[np.ndarray] = None

    @property
    def rank(self) -> int:
        return int(self.indices.size if self.indices is not None else self.vectors.shape[1])

    @property
    def basis(self) -> np.ndarray:
        if self.vectors is not None:
            return self.vectors
        out = np.zeros((self.dim, self.indices.size), dtype=complex)
        out[self.indices, np.arange(self.indices.size)] = 1.0
        return out

    def right(self, matrix: np.ndarray) -> np.ndarray:
        """X V"""
        if self.indices is not None:
            return matrix[:, self.indices]
        return matrix @ self.vectors

    def left(self, matrix: np.ndarray) -> np.ndarray:
        """V* Y"""
        if self.indices is not None:
            return matrix[self.indices]
        return self.vectors.conj().T @ matrix

    def compress(self, matrix: np.ndarray) -> np.ndarray:
        """V* X V"""
        if self.indices is not None:
            return matrix[np.ix_(self.indices, self.indices)]
        return self.left(self.right(matrix))

    def mass(self, vector: np.ndarray) -> float:
        """‖V* v‖² / ‖v‖²"""
        norm2 = float(np.vdot(vector, vector).real)
        if norm2 == 0.0:
            return 0.0
        return float(np.sum(np.abs(self.left(vector)) ** 2)) / norm2


def interior_subspace(pair: OperatorPair, halo: float = 0.0, conjugation: bool = False) -> InteriorSubspace:
    """
    절단 경계의 영향을 받지 않는 부분공간

    격자 모델은 interior 기저 벡터 자체, 연속 격자 모델은 위상공간 격자 위의
    결맞음 상태를 직교화한 것입니다. halo 만큼 경계에서 더 멀리 떨어집니다.
    conjugation 이면 e^{ix·Φ} 켤레 검사용의 더 좁은 부분공간을 씁니다 (Jacobi 모델).
    """
    if conjugation and pair.conjugation_mask is not None:
        return InteriorSubspace(dim=pair.dim, indices=np.flatnonzero(pair.conjugation_mask))
    if pair.packets is not None:
        return InteriorSubspace(dim=pair.dim, vectors=_coherent_packets(pair.packets, halo))
    cutoff = float(np.min(pair.seam_distance[pair.interior_mask])) + halo
    return InteriorSubspace(
        dim=pair.dim,
        indices=np.flatnonzero(pair.interior_mask & (pair.seam_distance >= cutoff)),
    )


def interior_basis(pair: OperatorPair, halo: float = 0.0) -> np.ndarray:
    """interior 부분공간의 정규직교 기저 (dim, k)"""
    return interior_subspace(pair, halo).basis


def _coherent_packets(layout: PacketLayout, halo: float) -> np.ndarray:
    sigma = layout.width
    x = layout.positions
    reach_x = layout.box_length / 4.0 - halo
    reach_p = layout.nyquist - _PACKET_EDGE / sigma - layout.momentum_reach
    if reach_x <= 0 or reach_p <= 0:
        raise BadDimension(detail=f"packet lattice empty (reach_x={reach_x:.3g}, reach_p={reach_p:.3g})")
    centers = np.arange(-reach_x, reach_x + 1e-12, _PACKET_STEP * sigma)
    centers -= 0.5 * (centers[0] + centers[-1])
    momenta = np.arange(-reach_p, reach_p + 1e-12, _PACKET_STEP / sigma)
    momenta -= 0.5 * (momenta[0] + momenta[-1])
    a, b = np.meshgrid(centers, momenta, indexing="ij")
    a, b = a.ravel(), b.ravel()
    packets = np.exp(-((x[:, None] - a[None, :]) ** 2) / (2.0 * sigma**2) + 1j * b[None, :] * x[:, None])
    block = scipy.linalg.orth(packets, rcond=1e-6)
    if layout.modes == 1:
        return block
    return np.kron(np.eye(layout.modes), block)


# ========== Jacobi 모델 ==========

def jacobi_hermite_matrices(N: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Hermite Jacobi 쌍 (0 부터 번호)

    H[k, k+1] = √(k+1)/2,  Φ[k, k-1] = -i√k,  Φ[k, k+1] = i√(k+1)
    """
    k = np.arange(1, N, dtype=float)
    H = np.diag(np.sqrt(k) / 2.0, 1) + np.diag(np.sqrt(k) / 2.0, -1)
    Phi = np.diag(1j * np.sqrt(k), 1) + np.diag(-1j * np.sqrt(k), -1)
    return H.astype(complex), Phi


def jacobi_laguerre_matrices(N: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Laguerre Jacobi 쌍 (0 부터 번호)

    H[k, k] = 2k+1, H[k, k±1] = k+1 / k,  Φ[k, k-1] = -(i/2)k,  Φ[k, k+1] = (i/2)(k+1)
    """
    k = np.arange(1, N, dtype=float)
    H = np.diag(2.0 * np.arange(N) + 1.0) + np.diag(k, 1) + np.diag(k, -1)
    Phi = np.diag(0.5j * k, 1) + np.diag(-0.5j * k, -1)
    return H.astype(complex), Phi


def _jacobi_masks(N: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    top = math.ceil(N / 8)
    seam = (N - 1 - np.arange(N)).astype(float)
    interior = np.arange(N) < N - top
    conj = np.arange(N) < N // 2
    return interior, seam, conj


def build_jacobi_hermite(N: int = 512) -> OperatorPair:
    """
    H' = 1 인 Hermite Jacobi 모델

    Raises:
        BadDimension: N < 8
    """
    if N < 8:
        raise BadDimension(detail=f"jacobi_hermite needs N >= 8, got {N}")
    H, Phi = jacobi_hermite_matrices(N)
    interior, seam, conj = _jacobi_masks(N)
    zero = np.zeros((N, N), dtype=complex)
    chain = ExactChain(hp=[np.eye(N, dtype=complex)], hpp=[[zero]], hppp=[[[zero]]])
    pair = OperatorPair(
        model_id="jacobi_hermite",
        H=HermitianOperator.from_matrix(H, "H"),
        Phi=[HermitianOperator.from_matrix(Phi, "Phi")],
        interior_mask=interior,
        seam_distance=seam,
        chain=chain,
        conjugation_mask=conj,
        params={"N": N, "box_extent": float(N)},
    )
    validate_pair(pair)
    logger.info("built jacobi_hermite N=%d", N)
    return pair


def build_jacobi_laguerre(N: int = 512) -> OperatorPair:
    """
    H' = H 인 Laguerre Jacobi 모델

    Raises:
        BadDimension: N < 8
    """
    if N < 8:
        raise BadDimension(detail=f"jacobi_laguerre needs N >= 8, got {N}")
    H, Phi = jacobi_laguerre_matrices(N)
    interior, seam, conj = _jacobi_masks(N)
    chain = ExactChain(hp=[H.copy()], hpp=[[H.copy()]], hppp=[[[H.copy()]]])
    pair = OperatorPair(
        model_id="jacobi_laguerre",
        H=HermitianOperator.from_matrix(H, "H"),
        Phi=[HermitianOperator.from_matrix(Phi, "Phi")],
        interior_mask=interior,
        seam_distance=seam,
        chain=chain,
        conjugation_mask=conj,
        params={"N": N, "box_extent": float(N)},
    )
    validate_pair(pair)
    logger.info("built jacobi_laguerre N=%d", N)
    return pair


# ========== ℤ^d 합성곱 ==========

CoefficientMap = Mapping[Union[int, Tuple[int, ...]], complex]


def _normalize_coefficients(coeffs: CoefficientMap) -> Dict[Tuple[int, ...], complex]:
    out: Dict[Tuple[int, ...], complex] = {}
    for key, value in coeffs.items():
        g = (int(key),) if isinstance(key, (int, np.integer)) else tuple(int(c) for c in key)
        out[g] = out.get(g, 0.0) + complex(value)
    dims = {len(g) for g in out}
    if len(dims) != 1:
        raise BadDimension(detail=f"inconsistent coefficient dimensions {sorted(dims)}")
    return out


def lattice_symbol_evaluator(coeffs: Dict[Tuple[int, ...], complex]) -> SymbolEvaluator:
    """m(ξ) = Σ_g μ(g) e^{-ig·ξ} 와 ∇m, ∇²m"""
    keys = np.array(list(coeffs), dtype=float)
    mu = np.array([coeffs[tuple(int(c) for c in g)] for g in keys], dtype=complex)

    def evaluate(xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        phase = np.exp(-1j * xi @ keys.T) * mu[None, :]  # (k, |supp|)
        m = np.real(phase.sum(axis=1))
        grad = np.real(phase @ (-1j * keys))
        hess = np.real(np.einsum("ks,sj,sl->kjl", phase, -1j * keys, -1j * keys))
        return m, grad, hess

    return evaluate


def _dft_basis(positions: np.ndarray, momenta: np.ndarray) -> np.ndarray:
    n = positions.size
    return np.exp(1j * np.outer(positions, momenta)) / math.sqrt(n)


def build_convolution_zd(
    coeffs: CoefficientMap,
    box: Union[int, Sequence[int]] = 256,
    boundary: str = "periodic",
    allow_identity: bool = True,
) -> OperatorPair:
    """
    주기 상자 위의 합성곱 H_μ 와 위치 Φ_j

    Args:
        coeffs: 유한 지지 μ (정수 또는 정수 튜플 → 계수)
        box: 축별 반지름 R (좌표 -R..R-1)
        boundary: "periodic" 만 지원
        allow_identity: 지지가 {0} 인 μ 허용 여부

    Raises:
        AsymmetricMeasure: μ(g) != conj(μ(-g))
        SupportTooLargeForBox: R < 4 · (지지 반지름)
    """
    if boundary != "periodic":
        raise UnsupportedModel(detail=f"convolution boundary '{boundary}'")
    mu = _normalize_coefficients(coeffs)
    d = len(next(iter(mu)))
    radii = [int(box)] * d if isinstance(box, (int, np.integer)) else [int(r) for r in box]
    if len(radii) != d or any(r < 2 for r in radii):
        raise BadDimension(detail=f"box {radii} for d={d}")
    for g, value in mu.items():
        partner = mu.get(tuple(-c for c in g), 0.0)
        if abs(value - np.conj(partner)) > 1e-14 * max(1.0, abs(value)):
            raise AsymmetricMeasure(detail=f"μ{g}={value} vs conj μ{tuple(-c for c in g)}={np.conj(partner)}")
    support = max((max(abs(c) for c in g) for g, v in mu.items() if v != 0), default=0)
    if support == 0 and not allow_identity:
        raise BadDimension(detail="support {0} not allowed")
    if support > 0 and min(radii) < 4 * support:
        raise SupportTooLargeForBox(detail=f"radius {min(radii)} < 4 * {support}")

    axes = [np.arange(-r, r, dtype=float) for r in radii]
    sizes = [a.size for a in axes]
    coords = np.stack([c.ravel() for c in np.meshgrid(*axes, indexing="ij")], axis=1)
    dim = coords.shape[0]

    # H[x, y] = μ(x - y), 좌표 차이는 주기적으로 감음
    H = np.zeros((dim, dim), dtype=complex)
    flat_x = np.arange(dim)
    for g, value in mu.items():
        if value == 0:
            continue
        shifted = []
        for j in range(d):
            idx = np.unravel_index(flat_x, sizes)[j]
            shifted.append((idx - g[j]) % sizes[j])
        flat_y = np.ravel_multi_index(tuple(shifted), sizes)
        H[flat_x, flat_y] += value

    xi_axes = [2.0 * np.pi * np.fft.fftfreq(n) for n in sizes]
    basis = _dft_basis(axes[0], xi_axes[0])
    for j in range(1, d):
        basis = np.kron(basis, _dft_basis(axes[j], xi_axes[j]))
    xi = np.stack([c.ravel() for c in np.meshgrid(*xi_axes, indexing="ij")], axis=1)
    evaluate = lattice_symbol_evaluator(mu)
    values, grad, hess = evaluate(xi)
    keys = np.array(list(mu), dtype=float)
    weights = np.array(list(mu.values()), dtype=complex)
    phase = np.exp(-1j * xi @ keys.T) * weights[None, :]
    third = np.real(np.einsum("ks,sj,sl,sm->kjlm", phase, -1j * keys, -1j * keys, -1j * keys))
    symbol = SymbolData(
        dimension=d,
        basis=basis,
        momenta=xi,
        values=values,
        gradient=grad,
        hessian=hess,
        third=third,
        evaluate=evaluate,
        domain=(-math.pi, math.pi),
        periodic=True,
        coefficients=mu,
    )

    edge = np.stack([np.minimum(coords[:, j] + radii[j], radii[j] - 1 - coords[:, j]) for j in range(d)], axis=1)
    seam = edge.min(axis=1)
    interior = seam >= max(2 * support, 1)
    Phi = [HermitianOperator(entries=np.diag(coords[:, j]).astype(complex), label=f"Phi_{j + 1}") for j in range(d)]
    pair = OperatorPair(
        model_id="convolution_zd",
        H=HermitianOperator.from_matrix(H, "H"),
        Phi=Phi,
        interior_mask=interior,
        seam_distance=seam,
        exact=symbol,
        params={"radii": radii, "support_radius": support, "box_extent": float(min(sizes))},
    )
    validate_pair(pair)
    logger.info("built convolution_zd d=%d sizes=%s support=%d", d, sizes, support)
    return pair


# ========== 연속 격자 모델 ==========

def _grid(N: int, L: float) -> Tuple[np.ndarray, np.ndarray, float]:
    if N < 8 or N & (N - 1):
        raise BadDimension(detail=f"grid size must be a power of two >= 8, got {N}")
    if L <= 0:
        raise BadDimension(detail=f"box length must be > 0, got {L}")
    dx = L / N
    x = -0.5 * L + (np.arange(N) + 0.5) * dx
    p = 2.0 * np.pi * np.fft.fftfreq(N, d=dx)
    return x, p, dx


def _packet_layout(x: np.ndarray, dx: float, L: float, modes: int = 1, reach: float = 1.0) -> PacketLayout:
    width = math.sqrt(L * dx / (2.0 * np.pi))
    return PacketLayout(positions=x, spacing=dx, box_length=L, width=width, modes=modes, momentum_reach=reach)


def _grid_masks(x: np.ndarray, L: float, modes: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    seam = 0.5 * L - np.abs(x)
    interior = np.abs(x) < 0.25 * L
    return np.tile(interior, modes), np.tile(seam, modes)


def grid_symbol_evaluator(h: Callable, hp: Callable, hpp: Callable) -> SymbolEvaluator:
    def evaluate(p: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        q = np.atleast_2d(np.asarray(p, dtype=float))[:, 0]
        return h(q), hp(q)[:, None], hpp(q)[:, None, None]

    return evaluate


def _grid_symbol(
    basis: np.ndarray,
    p: np.ndarray,
    funcs: Tuple[Callable, Callable, Callable, Callable],
    nyquist: float,
    offsets: Sequence[float] = (0.0,),
) -> SymbolData:
    h, hp, hpp, hppp = funcs
    values = np.concatenate([off + h(p) for off in offsets])
    grad = np.concatenate([hp(p) for _ in offsets])
    second = np.concatenate([hpp(p) for _ in offsets])
    third = np.concatenate([hppp(p) for _ in offsets])
    for name, arr in (("h", values), ("h'", grad), ("h''", second), ("h'''", third)):
        if not np.all(np.isfinite(arr)):
            bad = float(np.tile(p, len(offsets))[~np.isfinite(arr)][0])
            raise NonFiniteSymbol(detail=f"{name} at p={bad}")
    momenta = np.tile(p, len(offsets))[:, None]
    return SymbolData(
        dimension=1,
        basis=basis,
        momenta=momenta,
        values=values,
        gradient=grad[:, None],
        hessian=second[:, None, None],
        third=third[:, None, None, None],
        evaluate=grid_symbol_evaluator(h, hp, hpp),
        domain=(-nyquist, nyquist),
        periodic=False,
        offsets=tuple(float(o) for o in offsets),
    )


def _numeric_derivative(fn: Callable[[np.ndarray], np.ndarray], step: float = 1e-3) -> Callable:
    def derivative(p: np.ndarray) -> np.ndarray:
        return richardson_central_difference(lambda s: fn(np.asarray(p) + s), step)

    return derivative


DISPERSIVE_SYMBOLS: Dict[str, Tuple[Callable, Callable, Callable, Callable]] = {
    "linear": (lambda p: p, lambda p: np.ones_like(p), lambda p: np.zeros_like(p), lambda p: np.zeros_like(p)),
    "quadratic": (lambda p: p**2, lambda p: 2.0 * p, lambda p: 2.0 * np.ones_like(p), lambda p: np.zeros_like(p)),
    "quartic": (lambda p: p**4, lambda p: 4.0 * p**3, lambda p: 12.0 * p**2, lambda p: 24.0 * p),
    "relativistic": (
        lambda p: np.sqrt(1.0 + p**2),
        lambda p: p / np.sqrt(1.0 + p**2),
        lambda p: (1.0 + p**2) ** -1.5,
        lambda p: -3.0 * p * (1.0 + p**2) ** -2.5,
    ),
}


def resolve_symbol(symbol: Union[str, Sequence[Callable]]) -> Tuple[Callable, Callable, Callable, Callable]:
    """이름 또는 (h, h'[, h''[, h''']]) 를 네 함수로 확장 (누락된 도함수는 수치 미분)"""
    if isinstance(symbol, str):
        try:
            return DISPERSIVE_SYMBOLS[symbol]
        except KeyError:
            raise UnsupportedModel(detail=f"unknown dispersive symbol '{symbol}'") from None
    funcs = list(symbol)
    if len(funcs) < 2:
        raise UnsupportedModel(detail="dispersive symbol needs at least (h, h')")
    while len(funcs) < 4:
        funcs.append(_numeric_derivative(funcs[-1]))
    return tuple(funcs[:4])  # type: ignore[return-value]


def build_friedrichs(
    v: float = 1.0,
    potential: Union[None, np.ndarray, Callable[[np.ndarray], np.ndarray]] = None,
    N: int = 512,
    box_length: float = 128.0,
) -> OperatorPair:
    """
    H = v·P + V(Q), Φ = Q

    V = 0 이면 심볼 h(p) = v·p 를, 아니면 정확한 사슬 H' = v, H'' = 0 을 붙입니다.

    Raises:
        ZeroVelocity: v = 0
        BadDimension: N 이 2 의 거듭제곱이 아님
    """
    if v == 0:
        raise ZeroVelocity()
    x, p, dx = _grid(N, box_length)
    if potential is None:
        V = np.zeros(N)
    elif callable(potential):
        V = np.asarray(potential(x), dtype=float)
    else:
        V = np.asarray(potential, dtype=float)
    if V.shape != (N,) or not np.all(np.isfinite(V)):
        raise BadDimension(detail=f"potential must be {N} finite real samples")
    basis = _dft_basis(x, p)
    P = (basis * p) @ basis.conj().T
    H = v * P + np.diag(V)
    interior, seam = _grid_masks(x, box_length)
    exact = None
    chain = None
    if not np.any(V):
        linear = (
            lambda q: v * q,
            lambda q: v * np.ones_like(q),
            lambda q: np.zeros_like(q),
            lambda q: np.zeros_like(q),
        )
        exact = _grid_symbol(basis, p, linear, math.pi / dx)
    else:
        zero = np.zeros((N, N), dtype=complex)
        chain = ExactChain(hp=[v * np.eye(N, dtype=complex)], hpp=[[zero]], hppp=[[[zero]]])
    pair = OperatorPair(
        model_id="friedrichs",
        H=HermitianOperator.from_matrix(H, "H", tol=1e-10),
        Phi=[HermitianOperator(entries=np.diag(x).astype(complex), label="Q")],
        interior_mask=interior,
        seam_distance=seam,
        exact=exact,
        chain=chain,
        packets=_packet_layout(x, dx, box_length),
        params={"v": v, "N": N, "box_length": box_length, "box_extent": box_length},
    )
    validate_pair(pair)
    logger.info("built friedrichs v=%g N=%d L=%g potential=%s", v, N, box_length, bool(np.any(V)))
    return pair


def build_stark(v: float = 1.0, N: int = 512, box_length: float = 128.0) -> OperatorPair:
    """
    H = P² + v·Q, Φ = P 의 별칭

    Q 와 P 를 푸리에 교환하면 H = -v·P + Q², Φ = Q 인 friedrichs 모델이 됩니다.
    """
    pair = build_friedrichs(v=-v, potential=lambda q: q**2, N=N, box_length=box_length)
    pair.params["alias"] = "stark"
    return pair


def build_dispersive(
    symbol: Union[str, Sequence[Callable]] = "quadratic",
    N: int = 512,
    box_length: float = 128.0,
) -> OperatorPair:
    """
    H = h(P), Φ = Q

    Raises:
        NonFiniteSymbol: h 또는 도함수가 운동량 격자에서 유한하지 않음
    """
    funcs = resolve_symbol(symbol)
    x, p, dx = _grid(N, box_length)
    basis = _dft_basis(x, p)
    exact = _grid_symbol(basis, p, funcs, math.pi / dx)
    pair = OperatorPair(
        model_id="dispersive",
        H=HermitianOperator.from_matrix(exact.operator(exact.values), "H"),
        Phi=[HermitianOperator(entries=np.diag(x).astype(complex), label="Q")],
        interior_mask=_grid_masks(x, box_length)[0],
        seam_distance=_grid_masks(x, box_length)[1],
        exact=exact,
        packets=_packet_layout(x, dx, box_length),
        params={
            "symbol": symbol if isinstance(symbol, str) else "custom",
            "N": N,
            "box_length": box_length,
            "box_extent": box_length,
        },
    )
    validate_pair(pair)
    logger.info("built dispersive symbol=%s N=%d L=%g", pair.params["symbol"], N, box_length)
    return pair


def waveguide_thresholds(transverse_length: float, modes: int) -> np.ndarray:
    """Dirichlet 구간 [0, L] 의 고유값 (kπ/L)², k = 1..modes"""
    k = np.arange(1, modes + 1, dtype=float)
    return (k * np.pi / transverse_length) ** 2


def build_waveguide(
    transverse_length: float = math.pi,
    modes: int = 2,
    N: int = 256,
    box_length: float = 64.0,
) -> OperatorPair:
    """
    H = Σ_k E_k |k⟩⟨k| ⊗ I + I ⊗ P²,  Φ = I ⊗ Q

    기저 순서는 모드 우선 (index = k·N + n).

    Raises:
        BadDimension: modes < 1 또는 N 이 2 의 거듭제곱이 아님
    """
    if modes < 1 or transverse_length <= 0:
        raise BadDimension(detail=f"waveguide modes={modes}, L_transverse={transverse_length}")
    x, p, dx = _grid(N, box_length)
    energies = waveguide_thresholds(transverse_length, modes)
    block = _dft_basis(x, p)
    basis = np.kron(np.eye(modes), block)
    exact = _grid_symbol(basis, p, DISPERSIVE_SYMBOLS["quadratic"], math.pi / dx, offsets=energies)
    interior, seam = _grid_masks(x, box_length, modes)
    Phi = np.kron(np.eye(modes), np.diag(x)).astype(complex)
    pair = OperatorPair(
        model_id="waveguide",
        H=HermitianOperator.from_matrix(exact.operator(exact.values), "H"),
        Phi=[HermitianOperator(entries=Phi, label="Q")],
        interior_mask=interior,
        seam_distance=seam,
        exact=exact,
        packets=_packet_layout(x, dx, box_length, modes=modes),
        params={
            "transverse_length": transverse_length,
            "modes": modes,
            "N": N,
            "box_length": box_length,
            "thresholds": energies.tolist(),
            "box_extent": box_length,
        },
    )
    validate_pair(pair)
    logger.info("built waveguide modes=%d N=%d thresholds=%s", modes, N, np.round(energies, 6).tolist())
    return pair


# ========== 그래프 ==========

def build_adjacency(spec: GraphSpec) -> OperatorPair:
    """
    레벨 그래프의 인접 행렬 H = D + D* 와 레벨 함수 Φ

    twisted 경계에서는 이음매 간선에 위상을 주어 H 와 H' = -i(D - D*) 가 정확히 가환합니다.
    정확한 사슬은 H'' = -H, H''' = -H'.

    Raises:
        NotAdmissible: 허용 조건 위반
    """
    report = validate_admissible(spec)
    if not report.passed:
        raise NotAdmissible(detail=report.violation)
    D = orientation_matrix(spec, include_seam=True)
    H = D + D.conj().T
    Hp = -1j * (D - D.conj().T)
    levels = level_map(spec)
    seam = np.minimum(levels - spec.z_min, spec.z_max - levels)
    interior = seam >= 1
    chain = ExactChain(hp=[Hp], hpp=[[-H]], hppp=[[[-Hp]]])
    pair = OperatorPair(
        model_id="adjacency",
        H=HermitianOperator.from_matrix(H, "H"),
        Phi=[HermitianOperator(entries=np.diag(levels).astype(complex), label="Phi")],
        interior_mask=interior,
        seam_distance=seam.astype(float),
        chain=chain,
        graph=GraphLayout(spec=spec, levels=levels, orientation=orientation_matrix(spec, include_seam=False).real),
        params={
            "levels": {str(z): m for z, m in spec.levels.items()},
            "boundary": spec.boundary,
            "box_extent": float(spec.width),
        },
    )
    validate_pair(pair)
    logger.info("built adjacency levels=[%d, %d] dim=%d boundary=%s", spec.z_min, spec.z_max, pair.dim, spec.boundary)
    return pair


# ========== 카탈로그 ==========

@dataclass(frozen=True)
class CatalogEntry:
    model_id: str
    family: str  # 예제 계열 (같은 계열은 같은 H' 구조)
    summary: str
    defaults: Dict[str, Any]
    builder: Callable[..., OperatorPair]


CATALOG: Tuple[CatalogEntry, ...] = (
    CatalogEntry(
        "jacobi_hermite",
        "constant velocity",
        "Hermite Jacobi matrix, constant velocity H' = 1",
        {"N": 512},
        build_jacobi_hermite,
    ),
    CatalogEntry(
        "jacobi_laguerre",
        "homogeneous velocity",
        "Laguerre Jacobi matrix, dilation-homogeneous H' = H",
        {"N": 512},
        build_jacobi_laguerre,
    ),
    CatalogEntry(
        "friedrichs",
        "constant velocity",
        "H = v·P + V(Q), Phi = Q on a periodic grid",
        {"v": 1.0, "N": 512, "box_length": 128.0},
        build_friedrichs,
    ),
    CatalogEntry(
        "convolution_zd",
        "lattice convolution",
        "convolution by a finitely supported measure on Z^d, Phi = position",
        {"coeffs": {"1": 1.0, "-1": 1.0}, "box": 256},
        build_convolution_zd,
    ),
    CatalogEntry(
        "dispersive",
        "dispersive symbol",
        "H = h(P), Phi = Q on a periodic grid",
        {"symbol": "quadratic", "N": 512, "box_length": 128.0},
        build_dispersive,
    ),
    CatalogEntry(
        "adjacency",
        "level graph",
        "adjacency operator of a level graph, Phi = level map",
        {"z_min": -32, "z_max": 31, "multiplicities": "alternating"},
        build_adjacency,
    ),
    CatalogEntry(
        "waveguide",
        "waveguide",
        "straight waveguide with Dirichlet cross-section, Phi = longitudinal Q",
        {"transverse_length": math.pi, "modes": 2, "N": 256, "box_length": 64.0},
        build_waveguide,
    ),
)

# 별칭은 개수에 포함하지 않음
ALIASES: Dict[str, Tuple[str, str, str]] = {
    "stark": ("friedrichs", "constant velocity", "H = P^2 + v·Q, Phi = P (Fourier exchange of the friedrichs roles)"),
}


def get_entry(model_id: str) -> CatalogEntry:
    for entry in CATALOG:
        if entry.model_id == model_id:
            return entry
    raise UnsupportedModel(detail=f"unknown model_id '{model_id}'")


def list_catalog() -> str:
    """model_id, 예제 계열, 설명, 기본 파라미터 목록 (결정적 순서)"""
    lines = []
    for entry in CATALOG:
        defaults = ", ".join(f"{k}={v}" for k, v in entry.defaults.items())
        lines.append(f"{entry.model_id} ({entry.family}): {entry.summary} [{defaults}]")
    for alias, (target, family, summary) in ALIASES.items():
        lines.append(f"{alias} -> {target} ({family}): {summary}")
    return "\n".join(lines)
