"""
app/services/commutators.py 단위 테스트
"""

import numpy as np
import pytest

from app.core.exceptions import BadDimension, UnsupportedModel
from app.services.commutators import (
    check_commute_family,
    check_undos,
    commutator_chain,
    conjugate_H,
    default_x_samples,
    eigenspace_equation_residual,
    interior_residual,
    phase_formula_residual,
    virial_check,
)
from app.services.graphs import alternating_spec
from app.services.model_catalog import build_adjacency, build_friedrichs
from app.services.spectral import joint_spectral, kernel_split


class TestCommutatorChain:
    """교환자 사슬 테스트"""

    def test_hermite_constant_velocity(self, hermite_setup):
        pair, derived, _ = hermite_setup
        assert derived.provenance == "exact_chain"
        assert interior_residual(pair, derived.matrix_hp[0].entries - np.eye(pair.dim)) <= 1e-12
        assert derived.agreement["hp"] <= 1e-12

    def test_laguerre_homogeneous(self, laguerre_setup):
        pair, derived, _ = laguerre_setup
        assert interior_residual(pair, derived.matrix_hp[0].entries - pair.H.entries) <= 1e-12

    def test_quadratic_velocity(self, quadratic_setup):
        pair, derived, _ = quadratic_setup
        assert derived.provenance == "symbol_derivative"
        assert derived.agreement["hp"] <= 1e-8
        p = pair.exact.momenta[:, 0]
        assert np.allclose(derived.hp[0].entries, pair.exact.operator(2.0 * p), atol=1e-10)

    def test_matrix_route_without_exact_data(self):
        pair = build_friedrichs(v=1.0, potential=lambda q: 0.0 * q + 1e-3, N=64, box_length=32.0)
        pair.chain = None
        derived = commutator_chain(pair, depth=1)
        assert derived.provenance == "matrix_commutator"
        assert derived.depth == 1
        assert derived.hpp == []

    def test_depth_three(self, two_cos_pair):
        derived = commutator_chain(two_cos_pair, depth=3)
        assert derived.depth == 3
        # 2cos: H''' = -H'
        assert np.allclose(derived.hppp[0][0][0].entries, -derived.hp[0].entries, atol=1e-12)

    def test_invalid_depth(self, two_cos_pair):
        with pytest.raises(BadDimension):
            commutator_chain(two_cos_pair, depth=4)

    def test_hermitian_outputs(self, two_cos_setup):
        _, derived, _ = two_cos_setup
        for op in derived.hp + [h for row in derived.hpp for h in row]:
            assert np.array_equal(op.entries, op.entries.conj().T)


class TestConjugation:
    """H(x) 족 테스트"""

    def test_zero_shift_is_identity(self, two_cos_pair):
        assert np.array_equal(conjugate_H(two_cos_pair, [0.0]).entries, two_cos_pair.H.entries)

    def test_wrong_dimension(self, two_cos_pair):
        with pytest.raises(BadDimension):
            conjugate_H(two_cos_pair, [0.1, 0.2])

    def test_samples_reproducible(self, two_cos_pair):
        assert np.array_equal(default_x_samples(two_cos_pair, seed=5), default_x_samples(two_cos_pair, seed=5))
        assert np.all(np.abs(default_x_samples(two_cos_pair)) <= np.pi)

    @pytest.mark.parametrize("fixture", ["two_cos_setup", "quadratic_setup", "hermite_setup", "laguerre_setup"])
    def test_commute_family(self, fixture, request):
        pair = request.getfixturevalue(fixture)[0]
        record = check_commute_family(pair)
        assert record.passed, record.residual
        assert record.details["samples"] == 16

    def test_undos(self, two_cos_setup):
        pair, derived, _ = two_cos_setup
        assert check_undos(pair, derived).passed

    def test_undos_needs_depth_two(self, two_cos_pair):
        with pytest.raises(BadDimension):
            check_undos(two_cos_pair, commutator_chain(two_cos_pair, depth=1))


class TestVirial:
    """virial 정리 테스트"""

    def test_two_cos(self, two_cos_setup):
        record = virial_check(*two_cos_setup)
        assert record.passed
        assert record.details["interior_clusters"] > 0

    def test_laguerre(self, laguerre_setup):
        assert virial_check(*laguerre_setup).passed


class TestGraphChecks:
    """그래프 전용 검사 테스트"""

    @pytest.fixture(scope="class")
    def graph_setup(self):
        pair = build_adjacency(alternating_spec())
        derived = commutator_chain(pair, depth=2)
        return pair, derived, joint_spectral(pair, derived, seed=0)

    def test_phase_formula(self, graph_setup):
        assert phase_formula_residual(graph_setup[0], 0.7).passed

    def test_kernel_eigenspace_equation(self, graph_setup):
        pair, _, spectral = graph_setup
        split = kernel_split(spectral)
        assert split.kernel_dim > 0
        assert eigenspace_equation_residual(pair, split.K_basis) <= 1e-12

    def test_not_a_graph(self, two_cos_pair):
        with pytest.raises(UnsupportedModel):
            phase_formula_residual(two_cos_pair, 0.1)
