"""Tests for the per-family influence constructors."""

import numpy as np
import pytest

from conftest import random_sphere_sample, random_stiefel, random_unit
from depthforge.geometry import stiefel_tangent_basis
from depthforge.influences import (
    HuberLoss,
    glm_influence,
    location_influence,
    oc_influence,
    pc_influence,
    regression_influence,
    rrr_influence,
    sparse_rrr_influence,
    vmf_influence,
    watson_influence,
)
from depthforge.solver import DepthProblem, solve_depth
from oracles import count_closed, sweep_depth_1d, sweep_depth_2d, sweep_depth_subspace


class TestLocationInfluence:
    def test_scalar_example(self):
        T = location_influence(np.array([[1.0], [2.0], [3.0]]), np.array([2.0]))
        assert np.allclose(T.rows.ravel(), [-1.0, 0.0, 1.0])

    def test_first_influence_zero(self, rng):
        Z = rng.standard_normal((5, 3))
        T = location_influence(Z, Z[0])
        assert np.allclose(T.rows[0], 0.0)

    def test_depth_by_enumeration(self):
        T = location_influence(np.array([[1.0], [2.0], [3.0]]), np.array([2.0]))
        # enumerate v in {+1, -1}
        assert sweep_depth_1d(T.rows) == 2
        result = solve_depth(DepthProblem(influences=T))
        assert result.count == 2

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            location_influence(np.ones((3, 2)), np.ones(3))


class TestRegressionInfluence:
    def test_perfect_fit(self, rng):
        X = rng.standard_normal((10, 3))
        beta = rng.standard_normal(3)
        T = regression_influence(X, X @ beta, beta)
        assert np.allclose(T.rows, 0.0)

    def test_intercept_only_reduces_to_location(self, rng):
        y = rng.standard_normal(8)
        X = np.ones((8, 1))
        beta = np.array([0.3])
        T = regression_influence(X, y, beta)
        loc = location_influence(y[:, None], np.array([0.3]))
        assert np.allclose(T.rows, -loc.rows)

    def test_toy_depth_matches_sweep(self, rng):
        X = rng.standard_normal((3, 2))
        y = rng.standard_normal(3)
        beta = rng.standard_normal(2)
        T = regression_influence(X, y, beta)
        result = solve_depth(DepthProblem(influences=T))
        assert result.count == sweep_depth_2d(T.rows)
        assert result.certificate == "exact_oracle"


class TestWatsonInfluence:
    def test_vanishes_at_pole_and_equator(self, rng):
        mu = random_unit(rng, 3)
        perp = np.linalg.qr(np.column_stack([mu, rng.standard_normal((3, 2))]))[0][:, 1]
        Z = np.vstack([mu, -mu, perp])
        T = watson_influence(Z, mu)
        assert np.allclose(T.rows, 0.0, atol=1e-12)

    def test_45_degree_norm(self):
        mu = np.array([1.0, 0.0])
        z = np.array([[np.cos(np.pi / 4), np.sin(np.pi / 4)]])
        T = watson_influence(z, mu)
        assert np.isclose(np.linalg.norm(T.rows[0]), 0.5)

    def test_tangency(self, rng):
        mu = random_unit(rng, 4)
        Z = random_sphere_sample(rng, 12, 4)
        T = watson_influence(Z, mu)
        assert np.max(np.abs(T.rows @ mu)) < 1e-10

    def test_non_unit_rows_rejected(self, rng):
        with pytest.raises(ValueError):
            watson_influence(2.0 * random_sphere_sample(rng, 3, 3), random_unit(rng, 3))


class TestVmfInfluence:
    def test_all_at_mu_gives_depth_n(self, rng):
        mu = random_unit(rng, 3)
        Z = np.tile(mu, (6, 1))
        from depthforge.riemannian import vmf_depth

        assert vmf_depth(Z, mu).count == 6

    def test_circle_tangent_count(self, rng):
        mu = np.array([1.0, 0.0])
        Z = random_sphere_sample(rng, 9, 2)
        v = np.array([0.0, 1.0])  # the single tangent direction, up to sign
        want = min(count_closed(Z @ v), count_closed(-(Z @ v)))
        from depthforge.riemannian import vmf_depth

        assert vmf_depth(Z, mu).count == want

    def test_antipodal_pair_contributes_one(self, rng):
        mu = np.array([0.0, 0.0, 1.0])
        z = random_unit(rng, 3)
        Z = np.vstack([z, -z])
        T = vmf_influence(Z, mu)
        for _ in range(20):
            v = rng.standard_normal(3)
            v -= (v @ mu) * mu
            v /= np.linalg.norm(v)
            inner = T.rows @ v
            if np.all(np.abs(inner) > 1e-12):
                assert count_closed(inner) == 1


class TestPcInfluence:
    def test_zero_at_center(self, rng):
        m, r = 4, 2
        U = random_stiefel(rng, m, r)
        mu = rng.standard_normal(m)
        T, _ = pc_influence(np.tile(mu, (5, 1)), mu, U)
        assert np.allclose(T.rows, 0.0)

    def test_square_frame_kills_vector_part(self, rng):
        m = 3
        U = random_stiefel(rng, m, m)
        Z = rng.standard_normal((6, m))
        mu = rng.standard_normal(m)
        T, _ = pc_influence(Z, mu, U)
        assert np.allclose(T.rows[:, :m], 0.0, atol=1e-12)

    def test_depth_matches_effective_span_sweep(self, rng):
        # m=2, r=1: the influences live in a 2-dimensional effective span
        Z = rng.standard_normal((9, 2))
        mu = rng.standard_normal(2)
        U = random_stiefel(rng, 2, 1)
        T, basis = pc_influence(Z, mu, U)
        reduced = T.rows @ basis.basis
        result = solve_depth(DepthProblem(influences=T, direction_space=basis))
        assert result.count == sweep_depth_subspace(reduced)

    def test_matrix_part_tangent_component_only_matters(self, rng):
        # projecting the matrix block onto the tangent basis loses no counts
        Z = rng.standard_normal((7, 3))
        mu = rng.standard_normal(3)
        U = random_stiefel(rng, 3, 2)
        T, basis = pc_influence(Z, mu, U)
        tb = stiefel_tangent_basis(U)
        mat_block = T.rows[:, 3:]
        projected = mat_block @ tb.basis @ tb.basis.T
        resid = mat_block - projected
        # the skew part of U' (residual reshaped) vanishes: nothing is lost
        for i in range(7):
            R = resid[i].reshape((3, 2), order="F")
            skew = U.T @ R - (U.T @ R).T
            assert np.max(np.abs(skew)) < 1e-10


class TestOcInfluence:
    def test_perfect_projection_kills_vector_part(self, rng):
        m, rbar, n = 4, 2, 6
        U = random_stiefel(rng, m, rbar)
        mubar = rng.standard_normal(rbar)
        # craft Z with Z U = 1 mubar'
        B = rng.standard_normal((n, m - rbar))
        from depthforge.geometry import orthonormal_complement

        Up = orthonormal_complement(U)
        Z = np.outer(np.ones(n), mubar) @ U.T + B @ Up.T
        T, _ = oc_influence(Z, mubar, U)
        assert np.allclose(T.rows[:, :rbar], 0.0, atol=1e-10)

    def test_zero_sample(self, rng):
        m, rbar = 3, 1
        U = random_stiefel(rng, m, rbar)
        mubar = rng.standard_normal(rbar)
        T, _ = oc_influence(np.zeros((1, m)), mubar, U)
        assert np.allclose(T.rows[0, :rbar], mubar)
        assert np.allclose(T.rows[0, rbar:], 0.0)

    def test_oc_equals_negated_pc_no_intercept(self, rng):
        # matched ranks, no intercepts: OC influences = -PC influences samplewise
        m, r = 4, 2
        U = random_stiefel(rng, m, r)
        Z = random_sphere_sample(rng, 8, m)
        T_pc, basis_pc = pc_influence(Z, None, U)
        T_oc, basis_oc = oc_influence(Z, None, U)
        assert np.allclose(T_oc.rows, -T_pc.rows, atol=1e-12)
        assert np.allclose(basis_pc.basis, basis_oc.basis)


class TestGlmInfluence:
    def test_squared_equals_regression(self, rng):
        X = rng.standard_normal((12, 4))
        y = rng.standard_normal(12)
        beta = rng.standard_normal(4)
        a = glm_influence(X, y, beta, "squared")
        b = regression_influence(X, y, beta)
        assert np.array_equal(a.rows, b.rows)

    def test_logistic_at_zero(self, rng):
        X = rng.standard_normal((10, 3))
        y = rng.integers(0, 2, 10).astype(float)
        T = glm_influence(X, y, np.zeros(3), "logistic")
        assert np.allclose(T.rows, X * (0.5 - y)[:, None])

    def test_huber_small_residuals(self, rng):
        X = rng.standard_normal((10, 3))
        beta = rng.standard_normal(3)
        y = X @ beta - 0.01 * rng.uniform(0.1, 1.0, 10)
        a = glm_influence(X, y, beta, HuberLoss(1.345))
        b = regression_influence(X, y, beta)
        assert np.allclose(a.rows, b.rows)


class TestRrrInfluence:
    def test_exact_fit_zero(self, rng):
        X = rng.standard_normal((8, 3))
        B = rng.standard_normal((3, 2))
        T = rrr_influence(X, X @ B, B)
        assert np.allclose(T.rows, 0.0)

    def test_single_response_equals_regression(self, rng):
        X = rng.standard_normal((9, 3))
        y = rng.standard_normal(9)
        beta = rng.standard_normal(3)
        a = rrr_influence(X, y[:, None], beta[:, None])
        b = regression_influence(X, y, beta)
        assert np.allclose(a.rows, b.rows)

    def test_rank_deficient_instance_matches_sweep(self, rng):
        # identical predictor rows make the influence span 2-dimensional
        x = rng.standard_normal(2)
        X = np.tile(x, (4, 1))
        Y = rng.standard_normal((4, 2))
        B = rng.standard_normal((2, 2))
        T = rrr_influence(X, Y, B)
        result = solve_depth(DepthProblem(influences=T))
        assert result.count == sweep_depth_subspace(T.rows)


class TestSparseRrrInfluence:
    def test_exact_fit_kills_v_part(self, rng):
        n, p, m, r = 8, 4, 3, 2
        X = rng.standard_normal((n, p))
        A = rng.standard_normal((p, r))
        U = random_stiefel(rng, m, r)
        Y = X @ A @ U.T
        T, _ = sparse_rrr_influence(X, Y, A, U)
        assert np.allclose(T.rows[:, m * r:], 0.0, atol=1e-10)

    def test_zero_loading_kills_w_part(self, rng):
        n, p, m, r = 6, 3, 3, 2
        X = rng.standard_normal((n, p))
        Y = rng.standard_normal((n, m))
        U = random_stiefel(rng, m, r)
        T, _ = sparse_rrr_influence(X, Y, np.zeros((p, r)), U)
        assert np.allclose(T.rows[:, : m * r], 0.0)
        want = -(Y @ U)[:, :, None] * X[:, None, :]
        assert np.allclose(T.rows[:, m * r:], want.reshape(n, r * p))

    def test_scalar_case_reduces_to_glm(self, rng):
        # r = m = 1, U = [1]: the V block equals the gradient influences and
        # the loading-direction block has an empty tangent space
        n, p = 10, 3
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        a = rng.standard_normal(p)
        T, basis = sparse_rrr_influence(X, y[:, None], a[:, None], np.array([[1.0]]))
        g = glm_influence(X, y, a, "squared")
        assert np.allclose(T.rows[:, 1:], g.rows)
        # tangent space of O^{1x1} is trivial: basis covers only the V block
        assert basis.k == p


class TestSignSymmetry:
    def test_count_complement(self, rng):
        rows = rng.standard_normal((20, 3))
        for _ in range(10):
            v = random_unit(rng, 3)
            inner = rows @ v
            c_plus = count_closed(inner)
            c_minus = count_closed(-inner)
            assert c_minus >= 20 - c_plus
            if np.all(np.abs(inner) > 1e-12):
                assert c_minus == 20 - c_plus
