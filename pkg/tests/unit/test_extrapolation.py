"""
app/utils/extrapolation.py 단위 테스트
"""

import numpy as np
import pytest

from app.core.exceptions import FitIllConditioned
from app.utils.extrapolation import power_law_fit


class TestPowerLawFit:
    """power_law_fit 테스트"""

    def test_recovers_parameters(self):
        r = np.array([4.0, 8.0, 16.0, 32.0, 64.0])
        fit = power_law_fit(r, 3.0 + 2.0 * r**-1.5)
        assert fit.limit == pytest.approx(3.0, rel=1e-6)
        assert fit.amplitude == pytest.approx(2.0, rel=1e-4)
        assert fit.exponent == pytest.approx(1.5, rel=1e-4)

    def test_flat_data_has_no_exponent(self):
        fit = power_law_fit([1, 2, 3, 4], [5.0, 5.0, 5.0, 5.0])
        assert fit.limit == 5.0
        assert fit.exponent is None

    def test_too_few_points(self):
        with pytest.raises(FitIllConditioned):
            power_law_fit([1, 2, 3], [1.0, 0.5, 0.3])

    def test_non_finite(self):
        with pytest.raises(FitIllConditioned):
            power_law_fit([1, 2, 3, 4], [1.0, np.nan, 0.3, 0.2])
