"""
레벨 그래프 (허용 그래프) 구성과 검증

연속한 레벨 사이가 완전 이분 그래프로 연결된 유한 창을 다룹니다.
방향은 낮은 레벨 → 높은 레벨 (h → g 이면 Φ(h) + 1 = Φ(g)).

- validate_admissible: 닫힌 경로의 index 가 0 인지, 부모/자식 교집합 개수 조건
- orientation_matrix: D[g, h] = 1 (h → g), H = D + D*
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)

Vertex = Tuple[int, int]  # (level, index within level)

BOUNDARIES = ("twisted", "open")


@dataclass(frozen=True)
class GraphSpec:
    """
    레벨 z → 중복도 m_z 로 주어지는 그래프 창

    boundary:
        - "twisted": 최상단과 최하단 레벨을 seam_phase 위상으로 이어 붙인 주기 창
        - "open": 창의 양 끝이 벽
    """

    levels: Dict[int, int]
    boundary: str = "twisted"
    seam_phase: float = math.pi / 2

    def __post_init__(self) -> None:
        if not self.levels:
            raise ValueError("graph spec needs at least one level")
        if any(m < 1 for m in self.levels.values()):
            raise ValueError("level multiplicities must be >= 1")
        zs = sorted(self.levels)
        if zs != list(range(zs[0], zs[-1] + 1)):
            raise ValueError("levels must form a contiguous window")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")

    @property
    def z_min(self) -> int:
        return min(self.levels)

    @property
    def z_max(self) -> int:
        return max(self.levels)

    @property
    def width(self) -> int:
        return len(self.levels)


def alternating_spec(z_min: int = -32, z_max: int = 31, boundary: str = "twisted") -> GraphSpec:
    """짝수 레벨 중복도 1, 홀수 레벨 중복도 2 인 교대 그래프"""
    levels = {z: (2 if z % 2 else 1) for z in range(z_min, z_max + 1)}
    return GraphSpec(levels=levels, boundary=boundary)


def vertices(spec: GraphSpec) -> List[Vertex]:
    """레벨 오름차순, 레벨 내 index 오름차순 정점 목록 (행렬 기저 순서)"""
    return [(z, a) for z in sorted(spec.levels) for a in range(spec.levels[z])]


def level_graph(spec: GraphSpec, include_seam: bool = False) -> nx.DiGraph:
    """
    h → g 방향 그래프

    include_seam 이면 twisted 경계의 z_max → z_min 간선도 포함합니다 (weight 에 위상 저장).
    """
    graph = nx.DiGraph()
    for v in vertices(spec):
        graph.add_node(v, level=v[0])
    for z in range(spec.z_min, spec.z_max):
        for a in range(spec.levels[z]):
            for b in range(spec.levels[z + 1]):
                graph.add_edge((z, a), (z + 1, b), weight=1.0 + 0.0j)
    if include_seam and spec.boundary == "twisted" and spec.width > 1:
        phase = complex(np.exp(1j * spec.seam_phase))
        for a in range(spec.levels[spec.z_max]):
            for b in range(spec.levels[spec.z_min]):
                graph.add_edge((spec.z_max, a), (spec.z_min, b), weight=phase)
    return graph


@dataclass
class AdmissibilityReport:
    passed: bool
    violation: Optional[str] = None
    cycles_checked: int = 0
    pairs_checked: int = 0
    details: Dict[str, float] = field(default_factory=dict)


def _cycle_index(graph: nx.DiGraph, cycle: List[Vertex]) -> int:
    """닫힌 경로의 index = 정방향 간선 수 - 역방향 간선 수"""
    index = 0
    for u, w in zip(cycle, cycle[1:] + cycle[:1]):
        if graph.has_edge(u, w):
            index += 1
        elif graph.has_edge(w, u):
            index -= 1
        else:
            raise ValueError(f"cycle step {u} -> {w} is not an edge")
    return index


def validate_admissible(spec: GraphSpec) -> AdmissibilityReport:
    """
    허용 그래프 조건을 유한 창에서 전수 검사

    (a) 모든 닫힌 경로의 index 가 0 (순환 기저로 충분) 이고 Φ(h) + 1 = Φ(g)
    (b) 모든 정점 쌍 g, h 에 대해 #{N⁻(g)∩N⁻(h)} = #{N⁺(g)∩N⁺(h)}

    (b) 는 양쪽 이웃 레벨이 모두 존재하는 정점에 대해서만 검사합니다.
    twisted 경계에서는 이웃 레벨을 주기적으로 취합니다.

    Returns:
        AdmissibilityReport (첫 위반 사항 포함)
    """
    graph = level_graph(spec)
    undirected = graph.to_undirected()
    cycles = nx.cycle_basis(undirected)
    for cycle in cycles:
        index = _cycle_index(graph, cycle)
        if index != 0:
            return AdmissibilityReport(
                passed=False,
                violation=f"closed path through {cycle[0]} has index {index}",
                cycles_checked=len(cycles),
            )
    for h, g in graph.edges:
        if graph.nodes[h]["level"] + 1 != graph.nodes[g]["level"]:
            return AdmissibilityReport(passed=False, violation=f"edge {h}->{g} skips a level")

    periodic = level_graph(spec, include_seam=True)
    nodes = vertices(spec)
    checkable = [
        v for v in nodes
        if spec.boundary == "twisted" or spec.z_min < v[0] < spec.z_max
    ]
    pairs = 0
    for g, h in combinations_with_replacement(checkable, 2):
        pairs += 1
        fathers = len(set(periodic.predecessors(g)) & set(periodic.predecessors(h)))
        sons = len(set(periodic.successors(g)) & set(periodic.successors(h)))
        if fathers != sons:
            return AdmissibilityReport(
                passed=False,
                violation=f"#N-({g})∩N-({h}) = {fathers} != #N+({g})∩N+({h}) = {sons}",
                cycles_checked=len(cycles),
                pairs_checked=pairs,
            )
    logger.debug("validate_admissible: %d cycles, %d pairs ok", len(cycles), pairs)
    return AdmissibilityReport(passed=True, cycles_checked=len(cycles), pairs_checked=pairs)


def orientation_matrix(spec: GraphSpec, include_seam: bool = True) -> np.ndarray:
    """D[g, h] = 간선 h → g 의 가중치 (기저는 vertices(spec) 순서)"""
    graph = level_graph(spec, include_seam=include_seam)
    forward = nx.to_numpy_array(graph, nodelist=vertices(spec), dtype=complex, weight="weight")
    return forward.T


def level_map(spec: GraphSpec) -> np.ndarray:
    return np.array([float(z) for z, _ in vertices(spec)])
