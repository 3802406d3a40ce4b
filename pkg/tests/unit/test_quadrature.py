"""
app/utils/quadrature.py 단위 테스트
"""

import numpy as np
import pytest

from app.utils.quadrature import central_difference, richardson_central_difference, simpson_with_error


class TestDifferences:
    """수치 미분 테스트"""

    def test_central_difference_exact_on_quadratic(self):
        assert central_difference(lambda s: np.array([(1 + s) ** 2]), 0.1)[0] == pytest.approx(2.0)

    def test_richardson_more_accurate(self):
        fn = lambda s: np.array([np.sin(1.0 + s)])
        plain = abs(central_difference(fn, 0.1)[0] - np.cos(1.0))
        improved = abs(richardson_central_difference(fn, 0.1)[0] - np.cos(1.0))
        assert improved < plain / 10


class TestSimpsonWithError:
    """simpson_with_error 테스트"""

    def test_polynomial_integral(self):
        t = np.linspace(0, 2, 101)
        value, err = simpson_with_error(t**2, t[1] - t[0])
        assert value == pytest.approx(8 / 3, rel=1e-10)
        assert err < 1e-10

    def test_error_estimate_reflects_resolution(self):
        t = np.linspace(0, 10, 41)
        value, err = simpson_with_error(np.exp(-t), t[1] - t[0])
        assert abs(value - (1 - np.exp(-10))) < 10 * err + 1e-12
        assert err > 0

    def test_short_input(self):
        assert simpson_with_error(np.array([1.0]), 0.1) == (0.0, 0.0)
