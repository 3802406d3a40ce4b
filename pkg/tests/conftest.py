"""
time operator toolkit 테스트를 위한 공통 fixture
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# 프로젝트 루트를 path에 추가
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))


# ========== Settings Fixtures ==========

@pytest.fixture(autouse=True)
def reset_settings_cache():
    """각 테스트 전에 settings 캐시 초기화"""
    from app.core.config import get_settings
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    """고정 seed 난수 생성기"""
    return np.random.default_rng(0)


# ========== Profile Fixtures ==========

@pytest.fixture
def radial_profile_1d():
    from app.services.localisation import LocalisationProfile
    return LocalisationProfile(dimension=1, kind="radial_plateau", plateau_radius=1.0, decay_scale=0.5)


@pytest.fixture
def product_profile_2d():
    from app.services.localisation import LocalisationProfile
    return LocalisationProfile(dimension=2, kind="product_plateau", plateau_radius=1.0, decay_scale=1.0)


# ========== Model Fixtures ==========

@pytest.fixture(scope="session")
def two_cos_pair():
    """μ = δ_1 + δ_{-1}, 상자 반지름 128"""
    from app.services.model_catalog import build_convolution_zd
    return build_convolution_zd({1: 1.0, -1: 1.0}, box=128)


@pytest.fixture(scope="session")
def two_cos_setup(two_cos_pair):
    """2cos 모델의 (pair, derived, spectral)"""
    from app.services.commutators import commutator_chain
    from app.services.spectral import joint_spectral
    derived = commutator_chain(two_cos_pair, depth=2)
    return two_cos_pair, derived, joint_spectral(two_cos_pair, derived, seed=0)


@pytest.fixture(scope="session")
def quadratic_setup():
    """h(p) = p² 격자 모델 (N=256, L=64)"""
    from app.services.commutators import commutator_chain
    from app.services.model_catalog import build_dispersive
    from app.services.spectral import joint_spectral
    pair = build_dispersive("quadratic", N=256, box_length=64.0)
    derived = commutator_chain(pair, depth=2)
    return pair, derived, joint_spectral(pair, derived, seed=0)


@pytest.fixture(scope="session")
def friedrichs_setup():
    """H = P (v=1), N=512, L=256"""
    from app.services.commutators import commutator_chain
    from app.services.model_catalog import build_friedrichs
    from app.services.spectral import joint_spectral
    pair = build_friedrichs(v=1.0, N=512, box_length=256.0)
    derived = commutator_chain(pair, depth=2)
    return pair, derived, joint_spectral(pair, derived, seed=0)


@pytest.fixture(scope="session")
def laguerre_setup():
    from app.services.commutators import commutator_chain
    from app.services.model_catalog import build_jacobi_laguerre
    from app.services.spectral import joint_spectral
    pair = build_jacobi_laguerre(N=128)
    derived = commutator_chain(pair, depth=2)
    return pair, derived, joint_spectral(pair, derived, seed=0)


@pytest.fixture(scope="session")
def hermite_setup():
    from app.services.commutators import commutator_chain
    from app.services.model_catalog import build_jacobi_hermite
    from app.services.spectral import joint_spectral
    pair = build_jacobi_hermite(N=128)
    derived = commutator_chain(pair, depth=2)
    return pair, derived, joint_spectral(pair, derived, seed=0)


# ========== Filtered State Fixtures ==========

@pytest.fixture(scope="session")
def two_cos_filter():
    from app.services.linalg import SpectralFilter
    return SpectralFilter(center=0.0, half_width=1.0, margin=0.4)


@pytest.fixture(scope="session")
def two_cos_states(two_cos_setup, two_cos_filter):
    """2cos 모델의 필터링된 가우스 묶음 두 개"""
    from app.services.spectral import gaussian_packet, kappa_estimate, make_Dt_state
    pair, _, spectral = two_cos_setup
    kappa = kappa_estimate(spectral)
    return [
        make_Dt_state(pair, spectral, kappa, two_cos_filter, gaussian_packet(pair, center, 4.0, np.pi / 2)).vector
        for center in (0.0, 5.0)
    ]


# ========== Output Fixtures ==========

@pytest.fixture
def output_dir(tmp_path):
    """임시 출력 디렉토리"""
    return tmp_path / "results"
