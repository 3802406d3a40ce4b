"""
app/services/sojourn.py 단위 테스트

Friedrichs 모델 H = P 에서는 I_r = ∫_0^c f(s/r) ds 이므로 큰 r 에서 I_r → c (묶음 중심) 입니다.
"""

import logging

import numpy as np
import pytest

from app.core.config import settings
from app.core.exceptions import BadDimension, TailNotDecaying
from app.services.linalg import SpectralFilter
from app.services.localisation import LocalisationProfile
from app.services.model_catalog import build_friedrichs
from app.services.sojourn import (
    EvolutionCache,
    default_dt,
    packet_width,
    scaling_check,
    sojourn_integral,
    sojourn_sweep,
)
from app.services.spectral import gaussian_packet, joint_from_symbol, kappa_estimate, make_Dt_state

CENTER = 8.0


@pytest.fixture(scope="module")
def packet(friedrichs_setup):
    pair, _, spectral = friedrichs_setup
    eta = SpectralFilter(center=0.0, half_width=1.5, margin=0.5)
    seed = gaussian_packet(pair, CENTER, 3.0, 0.0)
    return make_Dt_state(pair, spectral, kappa_estimate(spectral), eta, seed).vector


class TestSojournIntegral:
    """I_r 계산 테스트"""

    def test_zero_state(self, friedrichs_setup, radial_profile_1d):
        pair, _, spectral = friedrichs_setup
        result = sojourn_integral(pair, spectral, radial_profile_1d, 4.0, np.zeros(pair.dim))
        assert result.I_r == 0.0
        assert result.t_max_used == 0.0

    def test_profile_covering_box_gives_zero(self, friedrichs_setup, packet):
        """f(Φ/r) = 1 이면 두 밀도의 합이 같아 g = 0"""
        pair, _, spectral = friedrichs_setup
        wide = LocalisationProfile(dimension=1, kind="radial_plateau", plateau_radius=1e6, decay_scale=0.5)
        assert sojourn_integral(pair, spectral, wide, 1.0, packet).I_r == 0.0

    def test_friedrichs_reaches_center(self, friedrichs_setup, packet, radial_profile_1d):
        pair, _, spectral = friedrichs_setup
        result = sojourn_integral(pair, spectral, radial_profile_1d, 16.0, packet)
        assert result.I_r == pytest.approx(CENTER, rel=1e-2)
        assert result.converged
        assert result.t_max_used < 0.5 * pair.box_extent

    def test_small_r_stays_below_center(self, friedrichs_setup, packet, radial_profile_1d):
        pair, _, spectral = friedrichs_setup
        assert 0.0 < sojourn_integral(pair, spectral, radial_profile_1d, 4.0, packet).I_r < CENTER

    def test_budget_too_short(self, friedrichs_setup, packet, radial_profile_1d):
        pair, _, spectral = friedrichs_setup
        with pytest.raises(TailNotDecaying):
            sojourn_integral(pair, spectral, radial_profile_1d, 16.0, packet, t_budget=5.0)

    @pytest.mark.parametrize("r", [0.0, -1.0])
    def test_non_positive_r(self, friedrichs_setup, packet, radial_profile_1d, r):
        pair, _, spectral = friedrichs_setup
        with pytest.raises(BadDimension):
            sojourn_integral(pair, spectral, radial_profile_1d, r, packet)


class TestSojournSweep:
    """r 스윕과 외삽 테스트"""

    def test_extrapolates_to_center(self, friedrichs_setup, packet, radial_profile_1d):
        pair, _, spectral = friedrichs_setup
        table = sojourn_sweep(pair, spectral, radial_profile_1d, packet, [4.0, 8.0, 16.0, 24.0], target=CENTER)
        assert [row.r for row in table.rows] == [4.0, 8.0, 16.0, 24.0]
        assert table.relative_gap < 0.02
        assert table.to_model().label == "sojourn"

    def test_threads_match_serial(self, friedrichs_setup, packet, radial_profile_1d):
        pair, _, spectral = friedrichs_setup
        r_list = [4.0, 8.0, 16.0, 24.0]
        serial = sojourn_sweep(pair, spectral, radial_profile_1d, packet, r_list, target=CENTER, jobs=1)
        threaded = sojourn_sweep(pair, spectral, radial_profile_1d, packet, r_list, target=CENTER, jobs=2)
        assert [row.I_r for row in threaded.rows] == [row.I_r for row in serial.rows]

    def test_r_list_not_ascending(self, friedrichs_setup, packet, radial_profile_1d):
        pair, _, spectral = friedrichs_setup
        with pytest.raises(BadDimension, match="ascending"):
            sojourn_sweep(pair, spectral, radial_profile_1d, packet, [8.0, 4.0, 16.0, 24.0], target=CENTER)

    def test_r_beyond_box_guard(self, friedrichs_setup, packet, radial_profile_1d):
        pair, _, spectral = friedrichs_setup
        with pytest.raises(BadDimension, match="box_extent"):
            sojourn_sweep(pair, spectral, radial_profile_1d, packet, [4.0, 8.0, 16.0, 100.0], target=CENTER)

    def test_packet_width(self, friedrichs_setup, packet):
        pair, _, _ = friedrichs_setup
        assert packet_width(pair, packet) == pytest.approx(3.0 / np.sqrt(2.0), rel=0.1)


class TestScaling:
    """속도 배율 테스트"""

    def test_double_velocity_halves_sojourn(self, friedrichs_setup, packet, radial_profile_1d):
        pair, _, spectral = friedrichs_setup
        fast = build_friedrichs(v=2.0, N=512, box_length=256.0)
        record = scaling_check(pair, spectral, fast, joint_from_symbol(fast), radial_profile_1d, packet, 16.0)
        assert record.passed, record.details
        assert record.details["slow"] == pytest.approx(2.0 * record.details["fast"], rel=0.05)


class TestEvolutionCache:
    """t 격자 밀도 캐시 테스트"""

    def test_extends_in_chunks(self, friedrichs_setup, packet):
        _, _, spectral = friedrichs_setup
        cache = EvolutionCache.for_state(spectral, packet, dt=0.25)
        cache.extend(10)
        assert cache.samples == 256
        cache.extend(300)
        assert cache.samples == 512

    def test_densities_conserve_norm(self, friedrichs_setup, packet):
        _, _, spectral = friedrichs_setup
        cache = EvolutionCache.for_state(spectral, packet, dt=0.25)
        plus, minus = cache.densities(5)
        assert plus.shape == (5, spectral.dim)
        np.testing.assert_allclose(plus.sum(axis=1), 1.0, atol=1e-10)
        np.testing.assert_allclose(minus.sum(axis=1), 1.0, atol=1e-10)
        np.testing.assert_allclose(plus[0], minus[0], atol=1e-14)
        assert cache.norm_defect <= settings.UNITARY_TOL

    def test_norm_drift_is_reported(self, friedrichs_setup, packet, caplog):
        _, _, spectral = friedrichs_setup
        seed = EvolutionCache.for_state(spectral, packet, dt=0.25)
        drifted = EvolutionCache(1.001 * seed.basis, seed.energies, seed.coefficients, seed.dt)
        with caplog.at_level(logging.WARNING, logger="app.services.sojourn"):
            drifted.extend(10)
        assert drifted.norm_defect == pytest.approx(2.001e-3, rel=1e-3)
        assert "norm drift" in caplog.text

    def test_default_dt(self, radial_profile_1d):
        assert default_dt(np.array([0.0, 1.0]), 10.0, radial_profile_1d, 1.0) == pytest.approx(0.5)
        assert default_dt(np.array([0.0, 4.0]), 10.0, radial_profile_1d, 1.0) == pytest.approx(np.pi / 16.0)
        assert default_dt(np.array([]), 10.0, radial_profile_1d, 0.0) == 1.0
