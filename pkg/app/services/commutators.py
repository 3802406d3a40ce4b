"""
교환자 사슬 H', H'', H''' 와 켤레족 H(x)

- commutator_chain: 행렬 교환자 경로와 정확한 경로(심볼 미분 / 해석적 사슬)를 모두 계산하고
  interior 에서의 일치도를 보고합니다. 이후 모듈은 정확한 경로를 사용합니다.
- conjugate_H: e^{-ix·Φ} H e^{ix·Φ} (대각 위상 또는 Φ 고유분해, 급수 절단 없음)
- check_commute_family / check_undos / virial_check: interior 로 압축한 잔차 검사
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from app.core.config import settings
from app.core.exceptions import BadDimension, UnsupportedModel
from app.schemas.report import CheckRecord
from app.services.graphs import level_graph
from app.services.linalg import HermitianOperator, JointSpectralData, operator_norm, split_clusters
from app.services.model_catalog import InteriorSubspace, OperatorPair, interior_subspace

logger = logging.getLogger(__name__)

PROVENANCES = ("matrix_commutator", "symbol_derivative", "exact_chain")

# interior 겹침이 이 값 이상이면 클러스터 벡터를 interior 로 간주
_INTERIOR_OVERLAP = 1.0 - 1e-8


@dataclass(eq=False)
class DerivedOperators:
    """
    H'_j, H''_{jk}, H'''_{jkl}

    hp/hpp/hppp 는 기본 경로(provenance) 의 값입니다. 행렬 교환자 경로는 항상 함께 계산되어
    matrix_hp/matrix_hpp 에 남고, 두 경로의 interior 차이가 agreement 입니다.
    """

    hp: List[HermitianOperator]
    hpp: List[List[HermitianOperator]]
    hppp: Optional[List[List[List[HermitianOperator]]]]
    provenance: str
    matrix_hp: List[HermitianOperator] = field(default_factory=list)
    matrix_hpp: List[List[HermitianOperator]] = field(default_factory=list)
    agreement: Dict[str, float] = field(default_factory=dict)
    asymmetry_defect: float = 0.0

    @property
    def depth(self) -> int:
        return 3 if self.hppp is not None else (2 if self.hpp else 1)

    def hprime_squared(self) -> np.ndarray:
        """(H')² = Σ_j H'_j²"""
        return sum(h.entries @ h.entries for h in self.hp)


# ========== 행렬 교환자 ==========

def _i_commutator(pair: OperatorPair, X: np.ndarray, j: int) -> np.ndarray:
    """i[X, Φ_j] (Φ 가 대각이면 원소별 곱)"""
    phi = pair.Phi[j].entries
    if pair.phi_diagonal:
        q = np.real(np.diag(phi))
        return 1j * X * (q[None, :] - q[:, None])
    return 1j * (X @ phi - phi @ X)


def _symmetrized(matrix: np.ndarray, label: str) -> tuple[HermitianOperator, float]:
    defect = float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0
    return HermitianOperator(entries=0.5 * (matrix + matrix.conj().T), label=label), defect


def _from_symbol(pair: OperatorPair, depth: int):
    sym = pair.exact
    d = pair.d
    hp = [HermitianOperator(sym.operator(sym.gradient[:, j]), f"H'_{j + 1}") for j in range(d)]
    hpp: List[List[Optional[HermitianOperator]]] = [[None] * d for _ in range(d)]
    for j in range(d):
        for k in range(j, d):
            op = HermitianOperator(sym.operator(sym.hessian[:, j, k]), f"H''_{j + 1}{k + 1}")
            hpp[j][k] = hpp[k][j] = op
    hppp = None
    if depth >= 3:
        hppp = [
            [
                [HermitianOperator(sym.operator(sym.third[:, j, k, l]), f"H'''_{j + 1}{k + 1}{l + 1}") for l in range(d)]
                for k in range(d)
            ]
            for j in range(d)
        ]
    return hp, hpp, hppp


def _from_chain(pair: OperatorPair, depth: int):
    chain = pair.chain
    d = pair.d
    hp = [HermitianOperator(np.asarray(m, dtype=complex), f"H'_{j + 1}") for j, m in enumerate(chain.hp)]
    hpp = [
        [HermitianOperator(np.asarray(chain.hpp[j][k], dtype=complex), f"H''_{j + 1}{k + 1}") for k in range(d)]
        for j in range(d)
    ]
    hppp = None
    if depth >= 3 and chain.hppp is not None:
        hppp = [
            [
                [
                    HermitianOperator(np.asarray(chain.hppp[j][k][l], dtype=complex), f"H'''_{j + 1}{k + 1}{l + 1}")
                    for l in range(d)
                ]
                for k in range(d)
            ]
            for j in range(d)
        ]
    return hp, hpp, hppp


def commutator_chain(pair: OperatorPair, depth: int = 2) -> DerivedOperators:
    """
    교환자 사슬 계산

    H'_j = i[H, Φ_j], H''_{jk} = i[H'_j, Φ_k], H''' 도 같은 방식.
    행렬 경로 결과는 (O + O*)/2 로 대칭화하고 비대칭도를 기록합니다.

    Args:
        pair: 모델
        depth: 1..3

    Returns:
        DerivedOperators (정확한 경로가 있으면 그것이 기본)
    """
    if depth not in (1, 2, 3):
        raise BadDimension(detail=f"depth must be 1..3, got {depth}")
    d = pair.d
    H = pair.H.entries

    matrix_hp: List[HermitianOperator] = []
    worst_defect = 0.0
    for j in range(d):
        op, defect = _symmetrized(_i_commutator(pair, H, j), f"H'_{j + 1}")
        matrix_hp.append(op)
        worst_defect = max(worst_defect, defect)
    matrix_hpp: List[List[HermitianOperator]] = []
    if depth >= 2:
        for j in range(d):
            row = []
            for k in range(d):
                op, defect = _symmetrized(_i_commutator(pair, matrix_hp[j].entries, k), f"H''_{j + 1}{k + 1}")
                row.append(op)
                worst_defect = max(worst_defect, defect)
            matrix_hpp.append(row)
    matrix_hppp = None
    if depth >= 3:
        matrix_hppp = [
            [
                [_symmetrized(_i_commutator(pair, matrix_hpp[j][k].entries, l), "")[0] for l in range(d)]
                for k in range(d)
            ]
            for j in range(d)
        ]
    if worst_defect > 1e-10 * max(pair.H.norm(), 1.0):
        logger.warning("commutator_chain[%s]: symmetrization defect %.3e", pair.model_id, worst_defect)

    if pair.exact is not None:
        hp, hpp, hppp = _from_symbol(pair, depth)
        provenance = "symbol_derivative"
    elif pair.chain is not None:
        hp, hpp, hppp = _from_chain(pair, depth)
        provenance = "exact_chain"
    else:
        hp, hpp, hppp = matrix_hp, matrix_hpp, matrix_hppp
        provenance = "matrix_commutator"

    agreement: Dict[str, float] = {}
    if provenance != "matrix_commutator":
        sub = interior_subspace(pair)
        agreement["hp"] = max(
            operator_norm(sub.compress(m.entries - e.entries)) for m, e in zip(matrix_hp, hp)
        )
        if depth >= 2:
            agreement["hpp"] = max(
                operator_norm(sub.compress(matrix_hpp[j][k].entries - hpp[j][k].entries))
                for j in range(d)
                for k in range(d)
            )
    logger.info(
        "commutator_chain[%s]: depth=%d provenance=%s agreement=%s",
        pair.model_id,
        depth,
        provenance,
        {k: f"{v:.2e}" for k, v in agreement.items()},
    )
    return DerivedOperators(
        hp=hp,
        hpp=hpp if depth >= 2 else [],
        hppp=hppp if depth >= 3 else None,
        provenance=provenance,
        matrix_hp=matrix_hp,
        matrix_hpp=matrix_hpp,
        agreement=agreement,
        asymmetry_defect=worst_defect,
    )


# ========== H(x) ==========

def _conjugator(pair: OperatorPair, x: np.ndarray) -> np.ndarray:
    """e^{ix·Φ} (Φ 가 대각이 아닐 때, d=1 이면 고유분해를 캐시)"""
    if pair.d == 1:
        if "phi_eigh" not in pair.cache:
            pair.cache["phi_eigh"] = scipy.linalg.eigh(pair.Phi[0].entries)
        theta, W = pair.cache["phi_eigh"]
        return (W * np.exp(1j * x[0] * theta)) @ W.conj().T
    generator = sum(xj * p.entries for xj, p in zip(x, pair.Phi))
    theta, W = scipy.linalg.eigh(0.5 * (generator + generator.conj().T))
    return (W * np.exp(1j * theta)) @ W.conj().T


def conjugate_operator(pair: OperatorPair, X: np.ndarray, x: Sequence[float]) -> np.ndarray:
    """e^{-ix·Φ} X e^{ix·Φ}"""
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    if xv.size != pair.d:
        raise BadDimension(detail=f"x has {xv.size} components, model has d={pair.d}")
    if not np.any(xv):
        return np.array(X, dtype=complex)
    if pair.phi_diagonal:
        w = np.exp(1j * (pair.positions() @ xv))
        out = w.conj()[:, None] * X * w[None, :]
    else:
        E = _conjugator(pair, xv)
        out = E.conj().T @ X @ E
    return 0.5 * (out + out.conj().T)


def conjugate_H(pair: OperatorPair, x: Sequence[float]) -> HermitianOperator:
    """H(x) = e^{-ix·Φ} H e^{ix·Φ}"""
    return HermitianOperator(entries=conjugate_operator(pair, pair.H.entries, x), label="H(x)")


def sample_reach(pair: OperatorPair) -> float:
    """x 표본 범위 (Jacobi 0.3, 연속 격자 1, 격자/그래프 π)"""
    if pair.conjugation_mask is not None:
        return 0.3
    if pair.packets is not None:
        return pair.packets.momentum_reach
    return math.pi


def default_x_samples(pair: OperatorPair, count: int = 16, seed: Optional[int] = None) -> np.ndarray:
    seed = settings.DEFAULT_SEED if seed is None else seed
    reach = sample_reach(pair)
    rng = np.random.default_rng(seed)
    return rng.uniform(-reach, reach, size=(count, pair.d))


# ========== interior 잔차 ==========

def interior_residual(pair: OperatorPair, X: np.ndarray, subspace: Optional[InteriorSubspace] = None) -> float:
    """‖V* X V‖"""
    sub = interior_subspace(pair) if subspace is None else subspace
    return operator_norm(sub.compress(X))


def _commutator_residual(sub: InteriorSubspace, A: np.ndarray, B: np.ndarray) -> float:
    """‖V* [A, B] V‖ (A, B 에르미트)"""
    AV = sub.right(A)
    BV = sub.right(B)
    block = AV.conj().T @ BV - BV.conj().T @ AV
    return operator_norm(block)


def check_commute_family(
    pair: OperatorPair,
    x_samples: Optional[np.ndarray] = None,
    tolerance: float = 1e-9,
) -> CheckRecord:
    """
    max_x ‖V*[H(x), H]V‖ / ‖H‖²

    [H(x), H] = 0 이 H(x) 족 전체의 가환성과 동치이므로 H 와의 교환자만 봅니다.
    """
    samples = default_x_samples(pair) if x_samples is None else np.atleast_2d(np.asarray(x_samples, dtype=float))
    sub = interior_subspace(pair, conjugation=True)
    H = pair.H.entries
    scale = pair.H.norm() ** 2
    worst, worst_x = 0.0, None
    for x in samples:
        residual = _commutator_residual(sub, conjugate_operator(pair, H, x), H)
        residual = residual / scale if scale > 0 else residual
        if residual > worst:
            worst, worst_x = residual, x
    logger.info("check_commute_family[%s]: %d samples, max %.3e", pair.model_id, len(samples), worst)
    return CheckRecord.evaluate(
        "commute_family",
        "[H(x), H] = 0 for all x",
        worst,
        tolerance,
        model=pair.model_id,
        samples=int(len(samples)),
        worst_x=None if worst_x is None else [float(c) for c in worst_x],
    )


def check_undos(
    pair: OperatorPair,
    derived: DerivedOperators,
    samples: Optional[np.ndarray] = None,
    tolerance: float = 1e-9,
) -> CheckRecord:
    """
    {H, H(x), H'_j, H'_j(y), H''_{kl}} 의 쌍별 interior 교환자

    잔차는 ‖V*[A, B]V‖ / (‖A‖·‖B‖) 의 최댓값입니다.
    """
    if derived.depth < 2:
        raise BadDimension(detail="check_undos needs derived operators of depth >= 2")
    xs = default_x_samples(pair, count=2) if samples is None else np.atleast_2d(np.asarray(samples, dtype=float))
    sub = interior_subspace(pair, conjugation=True)
    family: List[tuple[str, np.ndarray]] = [("H", pair.H.entries)]
    for n, x in enumerate(xs):
        family.append((f"H(x{n})", conjugate_operator(pair, pair.H.entries, x)))
    for j, h in enumerate(derived.hp):
        family.append((f"H'_{j + 1}", h.entries))
        for n, y in enumerate(xs):
            family.append((f"H'_{j + 1}(y{n})", conjugate_operator(pair, h.entries, y)))
    for k in range(pair.d):
        for l in range(k, pair.d):
            family.append((f"H''_{k + 1}{l + 1}", derived.hpp[k][l].entries))

    norms = [operator_norm(m) for _, m in family]
    projected = [sub.right(m) for _, m in family]
    worst, worst_pair = 0.0, ("", "")
    for a in range(len(family)):
        for b in range(a + 1, len(family)):
            if norms[a] == 0.0 or norms[b] == 0.0:
                continue
            block = projected[a].conj().T @ projected[b] - projected[b].conj().T @ projected[a]
            residual = operator_norm(block) / (norms[a] * norms[b])
            if residual > worst:
                worst, worst_pair = residual, (family[a][0], family[b][0])
    logger.info("check_undos[%s]: %d operators, max %.3e at %s", pair.model_id, len(family), worst, worst_pair)
    return CheckRecord.evaluate(
        "undos",
        "H(x), H'_j(y), H''_kl mutually commute",
        worst,
        tolerance,
        model=pair.model_id,
        operators=len(family),
        worst_pair=list(worst_pair),
    )


def virial_check(
    pair: OperatorPair,
    derived: DerivedOperators,
    spectral: JointSpectralData,
    tolerance: float = 1e-10,
) -> CheckRecord:
    """
    고유값 클러스터마다 ‖P_λ H'_j P_λ‖ (interior 에 놓인 클러스터 벡터만)

    클러스터 부분공간과 interior 부분공간의 교집합은 V* U_c 의 특이값이 1 인 방향입니다.
    교집합이 없는 클러스터는 경계 오염으로 따로 셉니다.
    """
    hvals = spectral.values("H")
    order = np.argsort(hvals, kind="stable")
    lam = hvals[order]
    basis = spectral.basis[:, order]
    diameter = max(float(lam[-1] - lam[0]), 1.0) if lam.size else 1.0
    clusters = split_clusters(lam, settings.CLUSTER_REL_GAP * diameter)
    sub = interior_subspace(pair)
    hp_norms = [h.norm() for h in derived.hp]

    worst, worst_lambda = 0.0, None
    interior_clusters = 0
    contaminated = 0
    for a, b in clusters:
        block = basis[:, a:b]
        overlap = sub.left(block)
        _, s, vh = np.linalg.svd(overlap, full_matrices=False)
        keep = s >= _INTERIOR_OVERLAP
        if not np.any(keep):
            contaminated += 1
            continue
        interior_clusters += 1
        vectors = block @ vh[keep].conj().T
        for h, norm in zip(derived.hp, hp_norms):
            compressed = vectors.conj().T @ h.entries @ vectors
            value = operator_norm(compressed) / norm if norm > 0 else operator_norm(compressed)
            if value > worst:
                worst, worst_lambda = value, float(np.mean(lam[a:b]))
    logger.info(
        "virial_check[%s]: %d clusters, %d interior, %d boundary-contaminated, max %.3e",
        pair.model_id,
        len(clusters),
        interior_clusters,
        contaminated,
        worst,
    )
    return CheckRecord.evaluate(
        "virial",
        "E({lambda}) H'_j E({lambda}) = 0",
        worst,
        tolerance,
        model=pair.model_id,
        clusters=len(clusters),
        interior_clusters=interior_clusters,
        boundary_contaminated=contaminated,
        worst_lambda=worst_lambda,
    )


# ========== 그래프 전용 ==========

def phase_formula_residual(pair: OperatorPair, x: float, tolerance: float = 1e-10) -> CheckRecord:
    """
    [H(x)φ](g) = Σ_{h~g} e^{ix[Φ(h) - Φ(g)]} φ(h) 와 conjugate_H 의 interior 차이

    Raises:
        UnsupportedModel: 그래프 모델이 아님
    """
    if pair.graph is None:
        raise UnsupportedModel(detail=f"{pair.model_id}: phase formula needs a level graph")
    spec = pair.graph.spec
    graph = level_graph(spec)
    index = {v: n for n, v in enumerate(sorted(graph.nodes))}
    explicit = np.zeros((pair.dim, pair.dim), dtype=complex)
    for h, g in graph.edges:
        a, b = index[g], index[h]
        explicit[a, b] += np.exp(1j * x * (h[0] - g[0]))
        explicit[b, a] += np.exp(1j * x * (g[0] - h[0]))
    conjugated = conjugate_operator(pair, pair.H.entries, [x])
    residual = interior_residual(pair, conjugated - explicit)
    return CheckRecord.evaluate(
        "phase_formula",
        "[H(x)phi](g) = sum_{h~g} exp(ix[Phi(h)-Phi(g)]) phi(h)",
        residual,
        tolerance,
        model=pair.model_id,
        x=float(x),
    )


def eigenspace_equation_residual(pair: OperatorPair, vectors: np.ndarray) -> float:
    """
    max_φ max(‖Σ_{h>g} φ(h)‖, ‖Σ_{h<g} φ(h)‖) / ‖φ‖ (interior 정점 g)

    Raises:
        UnsupportedModel: 그래프 모델이 아님
    """
    if pair.graph is None:
        raise UnsupportedModel(detail=f"{pair.model_id}: eigenspace equation needs a level graph")
    D = pair.graph.orientation
    mask = pair.interior_mask
    cols = np.atleast_2d(np.asarray(vectors, dtype=complex).T).T
    worst = 0.0
    for phi in cols.T:
        norm = float(np.linalg.norm(phi))
        if norm == 0.0:
            continue
        above = np.linalg.norm((D.T @ phi)[mask])
        below = np.linalg.norm((D @ phi)[mask])
        worst = max(worst, float(max(above, below)) / norm)
    return worst
