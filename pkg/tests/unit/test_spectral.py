"""
app/services/spectral.py 단위 테스트
"""

import math

import numpy as np
import pytest

from app.core.exceptions import BadDimension, FilteredToZero, FilterHitsKappa, NotJointlyDiagonalized
from app.services.commutators import commutator_chain
from app.services.linalg import HermitianOperator, SpectralFilter, joint_diagonalize
from app.services.model_catalog import build_convolution_zd, build_waveguide
from app.services.spectral import (
    basis_state,
    gaussian_packet,
    hprime_columns,
    kappa_estimate,
    kappa_symbolic,
    kernel_split,
    localisation_summary,
    make_Dt_state,
    phi_weight,
)


@pytest.fixture(scope="module")
def square_lattice_setup():
    """2차원 정사각 격자 μ = Σ δ_{±e_j}"""
    from app.services.spectral import joint_spectral
    pair = build_convolution_zd({(1, 0): 1.0, (-1, 0): 1.0, (0, 1): 1.0, (0, -1): 1.0}, box=8)
    derived = commutator_chain(pair, depth=2)
    return pair, derived, joint_spectral(pair, derived)


@pytest.fixture(scope="module")
def waveguide_setup():
    from app.services.spectral import joint_spectral
    pair = build_waveguide(transverse_length=math.pi, modes=2, N=64, box_length=32.0)
    derived = commutator_chain(pair, depth=2)
    return pair, derived, joint_spectral(pair, derived)


def _assert_points(estimate, expected):
    assert len(estimate.values) == len(expected), estimate.values
    for lam in expected:
        assert estimate.contains(lam), (lam, estimate.values)


class TestKappaEstimate:
    """κ(H) 추정 테스트"""

    def test_friedrichs_empty(self, friedrichs_setup):
        assert kappa_estimate(friedrichs_setup[2]).points == []

    def test_laguerre_zero(self, laguerre_setup):
        _assert_points(kappa_estimate(laguerre_setup[2]), [0.0])

    def test_two_cos(self, two_cos_setup):
        estimate = kappa_estimate(two_cos_setup[2])
        _assert_points(estimate, [-2.0, 2.0])
        assert estimate.method == "joint_spectral"

    def test_square_lattice(self, square_lattice_setup):
        _assert_points(kappa_estimate(square_lattice_setup[2]), [-4.0, 0.0, 4.0])

    def test_waveguide_thresholds(self, waveguide_setup):
        _assert_points(kappa_estimate(waveguide_setup[2]), [1.0, 4.0])

    def test_requires_hprime(self):
        data = joint_diagonalize([HermitianOperator(np.diag([1.0, 2.0]).astype(complex), "H")])
        with pytest.raises(NotJointlyDiagonalized):
            hprime_columns(data)

    def test_explicit_delta_and_threshold(self, two_cos_setup):
        estimate = kappa_estimate(two_cos_setup[2], delta=0.5, threshold=1e-3)
        assert estimate.delta == 0.5 and estimate.threshold == 1e-3


class TestKappaSymbolic:
    """심볼 경로 κ 테스트"""

    @pytest.mark.parametrize(
        "fixture,expected",
        [
            ("two_cos_setup", [-2.0, 2.0]),
            ("square_lattice_setup", [-4.0, 0.0, 4.0]),
            ("waveguide_setup", [1.0, 4.0]),
            ("quadratic_setup", [0.0]),
        ],
    )
    def test_critical_values(self, fixture, expected, request):
        pair = request.getfixturevalue(fixture)[0]
        estimate = kappa_symbolic(pair.exact)
        assert estimate.method == "symbolic"
        assert sorted(estimate.values) == pytest.approx(expected, abs=1e-9)

    @pytest.mark.parametrize("fixture", ["two_cos_setup", "square_lattice_setup", "waveguide_setup"])
    def test_matches_joint_route(self, fixture, request):
        pair, _, spectral = request.getfixturevalue(fixture)
        numeric = kappa_estimate(spectral)
        assert kappa_symbolic(pair.exact).matches(numeric, tol=numeric.delta)

    def test_friedrichs_no_critical_values(self, friedrichs_setup):
        assert kappa_symbolic(friedrichs_setup[0].exact).points == []


class TestStates:
    """상태 생성 테스트"""

    def test_packet_normalized(self, two_cos_pair):
        phi = gaussian_packet(two_cos_pair, 3.0, 4.0, 0.5)
        assert np.linalg.norm(phi) == pytest.approx(1.0)
        x = two_cos_pair.positions()[:, 0]
        assert float(np.sum(x * np.abs(phi) ** 2)) == pytest.approx(3.0, abs=1e-9)

    def test_packet_mode(self, waveguide_setup):
        pair = waveguide_setup[0]
        phi = gaussian_packet(pair, 0.0, 2.0, 1.0, mode=1)
        assert np.all(phi[: pair.dim // 2] == 0.0)
        with pytest.raises(BadDimension):
            gaussian_packet(pair, 0.0, 2.0, 1.0, mode=2)

    def test_bad_width(self, two_cos_pair):
        with pytest.raises(BadDimension):
            gaussian_packet(two_cos_pair, 0.0, 0.0)

    def test_basis_state(self, two_cos_pair):
        assert basis_state(two_cos_pair, 3)[3] == 1.0
        with pytest.raises(BadDimension):
            basis_state(two_cos_pair, two_cos_pair.dim)

    def test_phi_weight_of_origin(self, two_cos_pair):
        origin = int(np.flatnonzero(two_cos_pair.positions()[:, 0] == 0.0)[0])
        assert phi_weight(two_cos_pair, basis_state(two_cos_pair, origin), 2.0) == pytest.approx(1.0)

    def test_filtered_state(self, two_cos_setup, two_cos_filter):
        pair, _, spectral = two_cos_setup
        state = make_Dt_state(pair, spectral, kappa_estimate(spectral), two_cos_filter, gaussian_packet(pair, 0.0, 4.0, np.pi / 2))
        assert state.localized
        assert np.linalg.norm(state.vector) == pytest.approx(1.0)
        coeffs = spectral.coefficients(state.vector)
        outside = np.abs(spectral.values("H")) > 1.4 + 1e-12
        assert np.max(np.abs(coeffs[outside])) < 1e-12

    def test_filter_hits_kappa(self, two_cos_setup):
        pair, _, spectral = two_cos_setup
        with pytest.raises(FilterHitsKappa):
            make_Dt_state(pair, spectral, kappa_estimate(spectral), SpectralFilter(1.5, 0.3, 0.3), gaussian_packet(pair))

    def test_filtered_to_zero(self, two_cos_setup):
        pair, _, spectral = two_cos_setup
        with pytest.raises(FilteredToZero):
            make_Dt_state(pair, spectral, kappa_estimate(spectral), SpectralFilter(10.0, 0.5, 0.2), gaussian_packet(pair))

    def test_seam_state_reported(self, two_cos_setup, two_cos_filter):
        pair, _, spectral = two_cos_setup
        kappa = kappa_estimate(spectral)
        states = [
            make_Dt_state(pair, spectral, kappa, two_cos_filter, gaussian_packet(pair, center, 4.0, np.pi / 2))
            for center in (0.0, 127.0)
        ]
        assert states[0].localized
        assert not states[1].localized
        summary = localisation_summary(states)
        assert summary["unlocalized_states"] == 1
        assert summary["min_interior_mass"] == pytest.approx(states[1].interior_mass)
        assert summary["min_interior_mass"] < 0.99

    def test_empty_summary(self):
        assert localisation_summary([]) == {"min_interior_mass": 1.0, "unlocalized_states": 0}


class TestKernelSplit:
    """K ⊕ G 분해 테스트"""

    def test_two_cos_kernel(self, two_cos_setup):
        split = kernel_split(two_cos_setup[2])
        assert split.kernel_dim == 2
        assert split.orthogonality_defect() < 1e-12
        assert split.G_basis.shape[1] == two_cos_setup[0].dim - 2

    def test_friedrichs_trivial(self, friedrichs_setup):
        assert kernel_split(friedrichs_setup[2]).kernel_dim == 0
