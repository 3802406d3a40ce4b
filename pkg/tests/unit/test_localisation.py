"""
app/services/localisation.py 단위 테스트
"""

import math

import numpy as np
import pytest

from app.core.exceptions import NonDifferentiable, ProfileNotEven, SingularAtOrigin
from app.services.localisation import (
    LocalisationProfile,
    check_euler_relation,
    check_homogeneity,
    check_log_shift,
    check_radial_closed_form,
    decay_bound,
    eval_f,
    eval_f_grad,
    eval_Rf,
    eval_Rf_grad,
    sample_grid,
    validate_even,
)


class TestProfile:
    """LocalisationProfile 테스트"""

    def test_plateau_and_tail(self, radial_profile_1d):
        assert eval_f(radial_profile_1d, [0.0]) == 1.0
        assert eval_f(radial_profile_1d, [-1.0]) == 1.0
        assert eval_f(radial_profile_1d, [radial_profile_1d.tail_radius + 1.0]) < 1e-18

    def test_product_is_even_not_radial(self, product_profile_2d):
        validate_even(product_profile_2d)
        assert not product_profile_2d.is_radial
        # 대각선 방향과 축 방향은 같은 |x| 에서 값이 다름
        assert eval_f(product_profile_2d, [1.5, 0.0]) != pytest.approx(eval_f(product_profile_2d, [1.5 / math.sqrt(2)] * 2))

    def test_odd_custom_rejected(self):
        profile = LocalisationProfile(kind="custom", custom_f=lambda x: math.exp(-x[0] ** 2) * (1 + 0.5 * math.tanh(x[0])))
        with pytest.raises(ProfileNotEven):
            validate_even(profile)

    def test_decay_bound_finite(self, radial_profile_1d):
        assert math.isfinite(decay_bound(radial_profile_1d))

    def test_invalid_kind(self):
        with pytest.raises(ValueError):
            LocalisationProfile(kind="triangle")

    def test_gradient_matches_finite_difference(self, product_profile_2d):
        x = np.array([1.3, -0.4])
        h = 1e-6
        fd = np.array(
            [(eval_f(product_profile_2d, x + h * e) - eval_f(product_profile_2d, x - h * e)) / (2 * h) for e in np.eye(2)]
        )
        assert np.allclose(eval_f_grad(product_profile_2d, x), fd, atol=1e-6)

    def test_indicator_not_differentiable(self):
        with pytest.raises(NonDifferentiable):
            eval_f_grad(LocalisationProfile(kind="indicator_ball"), [1.0])


class TestRf:
    """R_f 값 테스트"""

    @pytest.mark.parametrize("norm", [0.3, 1.0, 4.0])
    def test_indicator_is_log(self, norm):
        profile = LocalisationProfile(dimension=2, kind="indicator_ball", plateau_radius=1.5)
        value = eval_Rf(profile, [norm, 0.0])
        assert value.value == pytest.approx(math.log(1.5 / norm), abs=1e-9)
        assert value.quadrature_error_estimate < 1e-8

    def test_origin(self, radial_profile_1d):
        with pytest.raises(SingularAtOrigin):
            eval_Rf(radial_profile_1d, [0.0])
        with pytest.raises(SingularAtOrigin):
            eval_Rf_grad(radial_profile_1d, [0.0])

    def test_log_shift_indicator(self):
        profile = LocalisationProfile(dimension=1, kind="indicator_ball", plateau_radius=1.0)
        assert check_log_shift(profile, sample_grid(1, n=10, r_min=0.5, r_max=20.0)) < 1e-8

    def test_closed_form_requires_radial(self, product_profile_2d):
        with pytest.raises(NonDifferentiable):
            eval_Rf_grad(product_profile_2d, [1.0, 1.0], method="closed")


class TestRfGradient:
    """R_f' 닫힌 형태 / 오일러 관계 테스트"""

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_radial_closed_form(self, d):
        profile = LocalisationProfile(dimension=d, kind="radial_plateau", plateau_radius=1.0, decay_scale=0.5)
        assert check_radial_closed_form(profile, sample_grid(d, n=100, r_min=0.5, r_max=50.0)) <= 1e-8

    @pytest.mark.parametrize("kind", ["radial_plateau", "product_plateau"])
    @pytest.mark.parametrize("d", [1, 2])
    def test_euler_relation_quadrature(self, kind, d):
        profile = LocalisationProfile(dimension=d, kind=kind, plateau_radius=1.0, decay_scale=1.0)
        xs = sample_grid(d, n=30, r_min=0.5, r_max=50.0)
        assert check_euler_relation(profile, xs, method="quadrature") <= 1e-8

    def test_euler_relation_closed(self):
        profile = LocalisationProfile(dimension=3)
        assert check_euler_relation(profile, sample_grid(3, n=100)) <= 1e-12

    def test_homogeneity(self, radial_profile_1d):
        report = check_homogeneity(radial_profile_1d, np.array([[0.7], [-2.0]]), ts=[0.5, 2.0, 3.0])
        assert report.max_residual_by_order[0] < 1e-8
        assert report.max_residual_by_order[1] < 1e-12
        assert report.max_residual_by_order[2] < 1e-6
        assert report.euler_max < 1e-12
        assert report.points == 2
