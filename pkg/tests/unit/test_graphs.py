"""
app/services/graphs.py 단위 테스트
"""

import numpy as np
import pytest

from app.core.exceptions import NotAdmissible
from app.services.graphs import (
    GraphSpec,
    alternating_spec,
    level_graph,
    level_map,
    orientation_matrix,
    validate_admissible,
    vertices,
)
from app.services.model_catalog import build_adjacency


class TestGraphSpec:
    """GraphSpec 테스트"""

    def test_alternating(self):
        spec = alternating_spec(-4, 3)
        assert spec.levels[-4] == 1 and spec.levels[-3] == 2
        assert spec.width == 8
        assert len(vertices(spec)) == 12

    @pytest.mark.parametrize(
        "levels,boundary",
        [({}, "twisted"), ({0: 0}, "twisted"), ({0: 1, 2: 1}, "twisted"), ({0: 1}, "closed")],
    )
    def test_invalid(self, levels, boundary):
        with pytest.raises(ValueError):
            GraphSpec(levels=levels, boundary=boundary)


class TestAdmissibility:
    """허용 그래프 조건 테스트"""

    def test_alternating_passes(self):
        report = validate_admissible(alternating_spec())
        assert report.passed
        assert report.cycles_checked > 0

    def test_uneven_neighbours_fail(self):
        report = validate_admissible(GraphSpec(levels={0: 1, 1: 2, 2: 3, 3: 1}))
        assert not report.passed
        assert "N-" in report.violation

    def test_build_rejects(self):
        with pytest.raises(NotAdmissible):
            build_adjacency(GraphSpec(levels={0: 1, 1: 2, 2: 3, 3: 1}))

    def test_edges_go_up_one_level(self):
        graph = level_graph(alternating_spec(-4, 3))
        assert all(g[0] == h[0] + 1 for h, g in graph.edges)


class TestAdjacency:
    """인접 연산자 테스트"""

    def test_orientation_shape(self):
        spec = alternating_spec(-4, 3)
        D = orientation_matrix(spec, include_seam=False)
        levels = level_map(spec)
        rows, cols = np.nonzero(D)
        assert np.all(levels[rows] == levels[cols] + 1)

    def test_twisted_h_and_hprime_commute(self):
        pair = build_adjacency(alternating_spec(-8, 7))
        H, Hp = pair.H.entries, pair.chain.hp[0]
        assert np.max(np.abs(H @ Hp - Hp @ H)) < 1e-12

    def test_spectrum_bounded(self):
        pair = build_adjacency(alternating_spec())
        evals = np.linalg.eigvalsh(pair.H.entries)
        assert np.max(np.abs(evals)) <= 2.0 * np.sqrt(2.0) + 1e-12
