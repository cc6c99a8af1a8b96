import numpy as np
import pytest

from ddstab import (NumericalConfig, is_controllable, is_schur, is_stabilizable,
                    matrix_exponential, numerical_rank, pinv, row_compress,
                    spectral_radius, subspace_contained)
from ddstab.linalg import controllability_matrix

from conftest import THREE_TANK_A_REF, THREE_TANK_B_REF, THREE_TANK_K_REF


class TestNumericalRank:
    def test_identity(self, cfg):
        assert numerical_rank(np.eye(3), cfg) == 3

    def test_one_nonzero_row(self, cfg):
        assert numerical_rank(np.array([[1.0, 2.0, 4.0], [0.0, 0.0, 0.0]]), cfg) == 1

    def test_zero_matrix(self, cfg):
        assert numerical_rank(np.zeros((2, 3)), cfg) == 0

    def test_transpose_invariant(self, cfg):
        rng = np.random.default_rng(0)
        for _ in range(50):
            M = rng.normal(size=(rng.integers(1, 6), rng.integers(1, 6)))
            assert numerical_rank(M, cfg) == numerical_rank(M.T, cfg)

    def test_constructed_rank(self, cfg):
        rng = np.random.default_rng(1)
        for _ in range(50):
            p, q = rng.integers(2, 7, size=2)
            r = int(rng.integers(0, min(p, q) + 1))
            M = rng.normal(size=(p, r)) @ rng.normal(size=(r, q)) if r else np.zeros((p, q))
            assert numerical_rank(M, cfg) == r


class TestRowCompress:
    def test_example1_values(self, cfg, example1):
        comp = row_compress(example1.x_minus, example1.x_plus, cfg)
        assert comp.r == 1
        # any valid S is accepted; check the defining identity instead
        lifted = np.vstack([comp.x_hat_minus, np.zeros((1, 3))])
        assert np.abs(comp.S @ example1.x_minus - lifted).max() <= cfg.equality_tol
        assert np.abs(comp.S @ comp.S.T - np.eye(2)).max() <= 1e-10
        # the compressed rows span the same data, up to sign of S
        assert numerical_rank(comp.x_hat_minus, cfg) == 1

    def test_full_rank_case(self, cfg):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(3, 5))
        comp = row_compress(X, rng.normal(size=(3, 5)), cfg)
        assert comp.r == 3
        assert np.allclose(comp.x_hat_minus, comp.S @ X)

    def test_invariants_random(self, cfg):
        rng = np.random.default_rng(3)
        for _ in range(60):
            n, T = rng.integers(1, 6), rng.integers(1, 8)
            r_true = int(rng.integers(0, min(n, T) + 1))
            X = (rng.normal(size=(n, r_true)) @ rng.normal(size=(r_true, T))
                 if r_true else np.zeros((n, T)))
            Xp = rng.normal(size=(n, T))
            comp = row_compress(X, Xp, cfg)
            assert comp.r == r_true
            lifted = np.vstack([comp.x_hat_minus, np.zeros((n - comp.r, T))])
            assert np.abs(comp.S @ X - lifted).max() <= cfg.equality_tol * max(1, abs(X).max())
            assert np.abs(comp.S @ comp.S.T - np.eye(n)).max() <= 1e-10
            assert numerical_rank(comp.x_hat_minus, cfg) == comp.r
            assert np.allclose(comp.x_hat_plus, (comp.S @ Xp)[:comp.r])


class TestSpectra:
    def test_zero(self, cfg):
        assert spectral_radius(np.zeros((2, 2))) == 0.0
        assert is_schur(np.zeros((2, 2)), cfg)

    def test_boundary_not_schur(self, cfg):
        assert spectral_radius(np.diag([1.0, 0.5])) == 1.0
        assert not is_schur(np.diag([1.0, 0.5]), cfg)

    def test_three_tank_closed_loop(self):
        M = THREE_TANK_A_REF + THREE_TANK_B_REF @ THREE_TANK_K_REF
        rho = spectral_radius(M)
        assert rho == pytest.approx(0.9512, abs=1e-3)
        assert rho < 1.0

    def test_empty(self):
        assert spectral_radius(np.zeros((0, 0))) == 0.0


class TestSystemPredicates:
    def test_example1_member_alpha0_beta05(self, cfg):
        A = np.array([[1.0, 0.0], [0.0, 0.5]])
        B = np.array([[1.0], [0.0]])
        assert not is_controllable(A, B, cfg)
        assert is_stabilizable(A, B, cfg)

    def test_example1_member_beta2_not_stabilizable(self, cfg):
        A = np.array([[1.0, 0.0], [0.0, 2.0]])
        B = np.array([[1.0], [0.0]])
        assert not is_stabilizable(A, B, cfg)

    def test_identity_pair(self, cfg):
        assert is_controllable(np.eye(2), np.eye(2), cfg)

    def test_controllable_implies_stabilizable(self, cfg):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            n, m = rng.integers(1, 5), rng.integers(1, 3)
            A = rng.normal(size=(n, n))
            B = rng.normal(size=(n, m))
            if is_controllable(A, B, cfg):
                assert is_stabilizable(A, B, cfg)


class TestSubspaceContained:
    def test_example1_images(self, cfg, example1):
        assert subspace_contained(example1.x_plus, example1.x_minus, cfg)

    def test_e2_not_in_e1(self, cfg):
        assert not subspace_contained(np.array([[0.0], [1.0]]), np.array([[1.0], [0.0]]), cfg)

    def test_anything_in_identity(self, cfg):
        rng = np.random.default_rng(5)
        assert subspace_contained(rng.normal(size=(3, 4)), np.eye(3), cfg)

    def test_agrees_with_lstsq_oracle(self, cfg):
        rng = np.random.default_rng(6)
        for _ in range(100):
            M = rng.normal(size=(4, 6))
            rank_n = int(rng.integers(1, 5))
            N = rng.normal(size=(4, rank_n)) @ rng.normal(size=(rank_n, 6))
            if rng.random() < 0.5:
                # force containment by projecting M into col(N)
                Q, _ = np.linalg.qr(N)
                Q = Q[:, :np.linalg.matrix_rank(N)]
                M = Q @ (Q.T @ M)
            resid_cols = [np.linalg.norm(M[:, j] - N @ np.linalg.lstsq(N, M[:, j], rcond=None)[0])
                          for j in range(M.shape[1])]
            oracle = max(resid_cols) <= 1e-7 * max(1.0, np.linalg.norm(M, 2))
            assert subspace_contained(M, N, cfg) == oracle


class TestPinv:
    def test_identity(self, cfg):
        assert np.allclose(pinv(np.eye(3), cfg), np.eye(3))

    def test_zero(self, cfg):
        assert pinv(np.zeros((2, 3)), cfg).shape == (3, 2)
        assert not pinv(np.zeros((2, 3)), cfg).any()

    def test_example1_normal_equations(self, cfg):
        # stacked [x_hat_minus; u_minus] from the two-state demo dataset
        M = np.array([[1.0, 2.0, 4.0], [1.0, 2.0, -1.0]])
        x_hat_plus = np.array([[2.0, 4.0, 3.0]])
        assert np.allclose(M @ M.T, [[21.0, 1.0], [1.0, 6.0]])
        assert np.allclose(x_hat_plus @ M.T, [[22.0, 7.0]])
        assert np.allclose(x_hat_plus @ pinv(M, cfg), [[1.0, 1.0]])

    def test_penrose_identities(self, cfg):
        rng = np.random.default_rng(7)
        for _ in range(50):
            p, q = rng.integers(1, 6, size=2)
            r = int(rng.integers(0, min(p, q) + 1))
            M = rng.normal(size=(p, r)) @ rng.normal(size=(r, q)) if r else np.zeros((p, q))
            Mp = pinv(M, cfg)
            assert np.abs(M @ Mp @ M - M).max() <= 1e-8
            assert np.abs(Mp @ M @ Mp - Mp).max() <= 1e-8
            assert np.abs((M @ Mp) - (M @ Mp).T).max() <= 1e-8
            assert np.abs((Mp @ M) - (Mp @ M).T).max() <= 1e-8


class TestMatrixExponential:
    def test_zero(self):
        assert np.allclose(matrix_exponential(np.zeros((3, 3))), np.eye(3))

    def test_scalar(self):
        assert matrix_exponential(np.array([[-0.05]]))[0, 0] == pytest.approx(np.exp(-0.05), rel=1e-12)

    def test_three_tank(self):
        Ac = np.array([[-0.6, 0.5, 0.0], [0.5, -0.5, 0.5], [0.0, 0.0, -0.5]])
        assert np.abs(matrix_exponential(0.1 * Ac) - THREE_TANK_A_REF).max() <= 1e-4


def test_config_invariants():
    with pytest.raises(ValueError):
        NumericalConfig(schur_margin=1.5)
    with pytest.raises(ValueError):
        NumericalConfig(psd_margin=0.0)
    with pytest.raises(ValueError):
        NumericalConfig(rank_rel_tol=-1e-9)


def test_controllability_matrix_shape():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    C = controllability_matrix(A, B)
    assert C.shape == (2, 2)
    assert np.allclose(C, [[0.0, 1.0], [1.0, 0.0]])
