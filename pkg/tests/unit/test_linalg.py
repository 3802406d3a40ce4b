"""
app/services/linalg.py 단위 테스트
"""

import numpy as np
import pytest
import scipy.stats

from app.core.exceptions import BadDimension, DomainError, NonHermitian, NotCommuting
from app.services.linalg import (
    HermitianOperator,
    SpectralFilter,
    apply_function,
    apply_function_to,
    evaluate_on_table,
    filter_idempotence_defect,
    hermiticity_defect,
    joint_diagonalize,
    operator_norm,
)


def _rotated(diagonals, seed=1):
    """같은 무작위 유니터리로 회전한 대각 행렬들"""
    u = scipy.stats.unitary_group.rvs(len(diagonals[0]), random_state=seed)
    return [u @ np.diag(np.asarray(d, dtype=complex)) @ u.conj().T for d in diagonals]


class TestHermitianOperator:
    """HermitianOperator 생성 테스트"""

    def test_from_matrix_symmetrizes(self):
        m = np.array([[1.0, 2.0 + 1e-14], [2.0, 3.0]])
        op = HermitianOperator.from_matrix(m, "H")
        assert np.array_equal(op.entries, op.entries.conj().T)
        assert op.dim == 2

    def test_non_hermitian(self):
        with pytest.raises(NonHermitian):
            HermitianOperator.from_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]), "N")

    def test_non_square(self):
        with pytest.raises(BadDimension):
            HermitianOperator.from_matrix(np.zeros((2, 3)))

    def test_norm(self):
        assert HermitianOperator.from_matrix(np.diag([1.0, -3.0])).norm() == pytest.approx(3.0)

    def test_hermiticity_defect_relative(self):
        assert hermiticity_defect(np.array([[0.0, 2.0], [1.0, 0.0]])) == pytest.approx(0.5)

    def test_power_iteration_norm(self, rng):
        m = rng.normal(size=(300, 300))
        m = m + m.T
        assert operator_norm(m) == pytest.approx(np.linalg.norm(m, 2), rel=1e-3)


class TestSpectralFilter:
    """SpectralFilter 테스트"""

    def test_plateau_and_support(self):
        eta = SpectralFilter(center=1.0, half_width=0.5, margin=0.25)
        assert eta.support == (0.25, 1.75)
        values = eta.evaluate(np.array([1.0, 1.5, 1.75, 2.0, 0.0]))
        assert np.allclose(values, [1.0, 1.0, 0.0, 0.0, 0.0])

    def test_transition_is_between(self):
        eta = SpectralFilter(center=0.0, half_width=1.0, margin=1.0)
        assert 0.0 < float(eta.evaluate(np.array([1.5]))[0]) < 1.0

    def test_invalid(self):
        with pytest.raises(ValueError):
            SpectralFilter(center=0.0, half_width=1.0, margin=0.0)
        with pytest.raises(ValueError):
            SpectralFilter(center=0.0, half_width=1.0, margin=0.1, order=2)


class TestJointDiagonalize:
    """joint_diagonalize 테스트"""

    def test_degenerate_family(self):
        a, b = _rotated([[1.0, 1.0, 2.0, 2.0], [0.0, 1.0, 0.0, 5.0]])
        data = joint_diagonalize([HermitianOperator(a, "A"), HermitianOperator(b, "B")], seed=0)
        assert data.unitarity_defect() < 1e-12
        for ref, m in (("A", a), ("B", b)):
            rebuilt = (data.basis * data.values(ref)) @ data.basis.conj().T
            assert np.allclose(rebuilt, m, atol=1e-10)
        pairs = sorted(zip(np.round(data.values("A"), 8), np.round(data.values("B"), 8)))
        assert pairs == [(1.0, 0.0), (1.0, 1.0), (2.0, 0.0), (2.0, 5.0)]

    def test_not_commuting(self):
        x = HermitianOperator(np.array([[0, 1], [1, 0]], dtype=complex), "X")
        z = HermitianOperator(np.array([[1, 0], [0, -1]], dtype=complex), "Z")
        with pytest.raises(NotCommuting, match="X, Z"):
            joint_diagonalize([x, z])

    def test_deterministic(self):
        a, b = _rotated([[0.0, 0.0, 1.0], [1.0, 2.0, 3.0]])
        family = [HermitianOperator(a, "A"), HermitianOperator(b, "B")]
        first = joint_diagonalize(family, seed=3)
        second = joint_diagonalize(family, seed=3)
        assert np.array_equal(first.basis, second.basis)

    def test_unknown_label(self):
        (a,) = _rotated([[1.0, 2.0]])
        data = joint_diagonalize([HermitianOperator(a, "A")])
        assert data.has("A") and not data.has("B")
        with pytest.raises(KeyError):
            data.values("B")


class TestFunctionalCalculus:
    """apply_function 계열 테스트"""

    @pytest.fixture
    def data(self):
        (a,) = _rotated([[-1.0, 0.0, 2.0]])
        return a, joint_diagonalize([HermitianOperator(a, "H")])

    def test_square(self, data):
        a, spectral = data
        assert np.allclose(apply_function(spectral, ["H"], lambda lam: lam**2), a @ a, atol=1e-12)

    def test_apply_to_vectors(self, data, rng):
        a, spectral = data
        v = rng.normal(size=3) + 1j * rng.normal(size=3)
        out = apply_function_to(spectral, ["H"], lambda lam: lam + 1.0, v)
        assert np.allclose(out, a @ v + v, atol=1e-12)

    def test_restrict_zeroes_outside(self, data):
        _, spectral = data
        mask = spectral.values("H") > 0.5
        values = evaluate_on_table(spectral, ["H"], lambda lam: 1.0 / lam, restrict=mask)
        assert np.count_nonzero(values) == 1

    def test_domain_error(self, data):
        _, spectral = data
        with np.errstate(divide="ignore"):
            with pytest.raises(DomainError, match="eigenvalue tuple"):
                evaluate_on_table(spectral, ["H"], lambda lam: 1.0 / lam)

    def test_filter_idempotent_away_from_transition(self, data):
        _, spectral = data
        eta = SpectralFilter(center=0.0, half_width=0.5, margin=0.5)
        assert filter_idempotence_defect(spectral, "H", eta) == 0.0
