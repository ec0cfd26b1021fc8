import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from paraexp import fitwave
from paraexp.expm import (DENSE_LIMIT, ExpmConfig, ExpmMode, expm_action, expm_action_taylor,
                          expm_dense, select_taylor_params)
from paraexp.linode import NumericalError, SparseMatrix

from conftest import random_cavity_state


def rotation(omega=1.0):
    return SparseMatrix.from_dense([[0.0, omega], [-omega, 0.0]])


def random_sparse(seed, n=8, density=0.4):
    rng = np.random.default_rng(seed)
    dense = rng.standard_normal((n, n)) * (rng.random((n, n)) < density)
    return SparseMatrix.from_dense(dense)


class TestTaylorExamples:
    def test_scalar_degree_four(self):
        one = SparseMatrix.identity(1)
        y = expm_action_taylor(one, [1.0], 1.0, m=4, s=1)
        assert y[0] == pytest.approx(1 + 1 + 1 / 2 + 1 / 6 + 1 / 24, rel=1e-15)
        assert y[0] == pytest.approx(2.7083333333333335, rel=1e-15)

    def test_scalar_two_substeps(self):
        y = expm_action_taylor(SparseMatrix.identity(1), [1.0], 1.0, m=4, s=2)
        assert y[0] == pytest.approx(1.6484375**2, rel=1e-15)
        assert y[0] == pytest.approx(2.71734619140625, rel=1e-15)

    def test_zero_time_and_zero_vector(self):
        a = random_sparse(0)
        b = np.arange(8.0)
        np.testing.assert_array_equal(expm_action_taylor(a, b, 0.0, 20, 1), b)
        assert not expm_action_taylor(a, np.zeros(8), 1.0, 20, 3).any()

    def test_rotation_quarter_turn(self):
        y = expm_action(rotation(), [1.0, 0.0], math.pi / 2, ExpmConfig(mode="taylor"))
        np.testing.assert_allclose(y, [0.0, -1.0], atol=1e-14)

    def test_divergence_reported(self):
        a = SparseMatrix.identity(2) @ SparseMatrix.from_dense(np.diag([1e200, 1.0]))
        with pytest.raises(NumericalError, match=r"m=20, s=1"):
            expm_action_taylor(a, [1.0, 1.0], 1.0, 20, 1)

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            expm_action_taylor(rotation(), [1.0, 0.0], 1.0, 0, 1)
        with pytest.raises(ValueError):
            ExpmConfig(m=20, s=0)
        with pytest.raises(ValueError):
            expm_action_taylor(rotation(), [1.0], 1.0, 20, 1)


class TestSelectParams:
    @pytest.mark.parametrize("t, expected", [(0.0, (20, 1)), (0.5, (20, 1)), (1.0, (20, 2)),
                                             (1.6, (20, 4)), (-1.6, (20, 4))])
    def test_examples(self, t, expected):
        # ||rotation(2)||_1 = 2
        assert select_taylor_params(rotation(2.0), t) == expected

    def test_zero_matrix(self):
        assert select_taylor_params(SparseMatrix.zeros(3), 5.0) == (20, 1)

    def test_order_raised_only_for_tiny_tol(self):
        assert select_taylor_params(rotation(), 1.0, 1e-16)[0] == 20
        m, _ = select_taylor_params(rotation(), 1.0, 1e-25)
        assert 1 / math.factorial(m + 1) < 1e-25 <= 1 / math.factorial(m)

    @given(st.floats(1e-3, 1e3), st.integers(0, 50))
    def test_scaled_norm_at_most_one(self, t, seed):
        a = random_sparse(seed)
        _, s = select_taylor_params(a, t)
        assert t * a.norm1() / s <= 1.0 + 1e-12
        if s > 1:
            assert t * a.norm1() / (s - 1) > 1.0


class TestAccuracy:
    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("t", [0.1, 1.0, 3.0])
    def test_taylor_agrees_with_dense(self, seed, t):
        a = random_sparse(seed)
        b = np.random.default_rng(seed).standard_normal(8)
        exact = scipy.linalg.expm(t * a.to_dense()) @ b
        y = expm_action(a, b, t, ExpmConfig(mode=ExpmMode.TAYLOR))
        assert np.linalg.norm(y - exact) <= 1e-10 * max(1.0, np.linalg.norm(exact))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_semigroup(self, seed, t1, t2):
        a = random_sparse(seed)
        b = np.random.default_rng(seed).standard_normal(8)
        cfg = ExpmConfig(mode="taylor")
        two = expm_action(a, expm_action(a, b, t1, cfg), t2, cfg)
        one = expm_action(a, b, t1 + t2, cfg)
        assert np.linalg.norm(two - one) <= 1e-12 * max(1.0, np.linalg.norm(one))

    def test_inverse(self):
        a = random_sparse(3)
        b = np.ones(8)
        back = expm_dense(a, -0.7) @ (expm_dense(a, 0.7) @ b)
        np.testing.assert_allclose(back, b, rtol=1e-12)

    def test_refinement_is_monotone_for_small_order(self):
        a = random_sparse(5)
        b = np.ones(8)
        exact = scipy.linalg.expm(2.0 * a.to_dense()) @ b
        errs = [np.linalg.norm(expm_action_taylor(a, b, 2.0, 4, s) - exact)
                for s in (2, 4, 8, 16)]
        assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
        errs = [np.linalg.norm(expm_action_taylor(a, b, 2.0, m, 4) - exact)
                for m in (2, 4, 6, 8)]
        assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))

    @pytest.mark.parametrize("mode", ["dense", "taylor"])
    def test_cavity_energy_preserved(self, cavity_5x5, mode):
        sys, u0, _ = cavity_5x5
        mass = sys.structure.mass()
        y = expm_action(sys.a, u0, 3e-8, ExpmConfig(mode=mode))
        assert np.sum(mass * y * y) == pytest.approx(np.sum(mass * u0 * u0), rel=1e-10)

    def test_cavity_taylor_matches_dense(self):
        sys = fitwave.build_wave_system(fitwave.FitGrid(7, 7, 2)).homogeneous()
        u0 = random_cavity_state(sys, 4)
        exact = expm_dense(sys.a, 5e-9) @ u0
        y = expm_action(sys.a, u0, 5e-9, ExpmConfig(mode="taylor"))
        assert np.linalg.norm(y - exact) <= 1e-10 * np.linalg.norm(exact)


class TestDense:
    def test_identity_and_zero(self):
        np.testing.assert_allclose(expm_dense(SparseMatrix.zeros(3)), np.eye(3))
        np.testing.assert_allclose(expm_dense(SparseMatrix.identity(2), 2.0),
                                   math.exp(2.0) * np.eye(2), rtol=1e-14)

    def test_accepts_ndarray(self):
        np.testing.assert_allclose(expm_dense(np.array([[0.0, 1.0], [0.0, 0.0]]), 3.0),
                                   [[1.0, 3.0], [0.0, 1.0]], atol=1e-15)

    def test_size_guard(self):
        with pytest.raises(ValueError, match="Taylor"):
            expm_dense(SparseMatrix.zeros(DENSE_LIMIT + 1))

    def test_mode_parse(self):
        assert ExpmMode.parse("TAYLOR") is ExpmMode.TAYLOR
        with pytest.raises(ValueError):
            ExpmMode.parse("pade")
