"""Tests for the depth solver: exact oracles, slack steps, multi-start search."""

import numpy as np
import pytest

from conftest import random_unit
from depthforge.influences import InfluenceSet
from depthforge.solver import (
    DepthProblem,
    SlackChannel,
    SolverConfig,
    count_halfzero,
    evaluate_01,
    exact_depth_2d,
    order2_depth,
    slack_step_01,
    slack_step_smooth,
    solve_depth,
    surrogate_direction_gradient,
    surrogate_slack_gradient,
)
from oracles import (
    box_slack_sweep_oracle,
    count_closed,
    golden_section,
    sweep_depth_2d,
)

LIGHT = SolverConfig(restarts=16, stages=5, max_iters=60, net_size=512)


class TestEvaluate01:
    def test_all_zero_influences(self, rng):
        T = InfluenceSet(np.zeros((7, 3)))
        v = random_unit(rng, 3)
        assert evaluate_01(DepthProblem(influences=T), v) == 7

    def test_line_example(self):
        T = InfluenceSet(np.array([[-1.0], [0.0], [1.0]]))
        assert evaluate_01(DepthProblem(influences=T), np.array([1.0])) == 2

    def test_negation_leaves_min_unchanged(self, rng):
        rows = rng.standard_normal((12, 2))
        a = solve_depth(DepthProblem(influences=InfluenceSet(rows)))
        b = solve_depth(DepthProblem(influences=InfluenceSet(-rows)))
        assert a.count == b.count

    def test_rejects_non_unit(self, rng):
        T = InfluenceSet(rng.standard_normal((4, 3)))
        with pytest.raises(ValueError):
            evaluate_01(DepthProblem(influences=T), np.array([1.0, 1.0, 0.0]))

    def test_rejects_out_of_space(self, rng):
        from depthforge.geometry import TangentBasis

        T = InfluenceSet(rng.standard_normal((4, 3)))
        basis = TangentBasis(np.eye(3)[:, :1])
        with pytest.raises(ValueError):
            evaluate_01(DepthProblem(influences=T, direction_space=basis), np.array([0.0, 1.0, 0.0]))

    def test_rejects_infeasible_slack(self):
        T = InfluenceSet(np.ones((3, 2)))
        chan = SlackChannel(kind="box", bound=0.5, free_idx=np.array([0]))
        problem = DepthProblem(influences=T, slack=chan)
        with pytest.raises(ValueError):
            evaluate_01(problem, np.array([1.0, 0.0]), np.array([1.0, 0.0]))


class TestExactDepth2d:
    def test_triangle(self):
        assert exact_depth_2d(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])) == 1

    def test_repeated_point(self):
        pts = np.tile([0.3, 0.4], (6, 1))
        assert exact_depth_2d(pts) == 0
        assert exact_depth_2d(np.zeros((6, 2))) == 6

    def test_antipodal_pairs(self, rng):
        for _ in range(5):
            half = rng.standard_normal((4, 2))
            pts = np.vstack([half, -half])
            assert exact_depth_2d(pts) == 4
            assert sweep_depth_2d(pts) == 4

    def test_matches_independent_sweep(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 50))
            pts = rng.standard_normal((n, 2))
            if rng.uniform() < 0.2:
                pts[rng.integers(0, n)] = 0.0
            assert exact_depth_2d(pts) == sweep_depth_2d(pts)

    def test_needs_dim_2(self):
        with pytest.raises(ValueError):
            exact_depth_2d(np.zeros((3, 3)))


class TestSolveDepth:
    def test_all_zero(self, rng):
        T = InfluenceSet(np.zeros((5, 4)))
        result = solve_depth(DepthProblem(influences=T), LIGHT)
        assert result.count == 5
        assert result.normalized == 1.0

    def test_2d_exact_certificate(self, rng):
        T = InfluenceSet(rng.standard_normal((20, 2)))
        result = solve_depth(DepthProblem(influences=T))
        assert result.certificate == "exact_oracle"
        assert result.count == sweep_depth_2d(T.rows)

    def test_heuristic_matches_exact_in_2d(self, rng):
        forced = SolverConfig(restarts=16, stages=5, max_iters=60, net_size=720,
                              force_heuristic=True)
        for _ in range(40):
            n = int(rng.integers(3, 40))
            rows = rng.standard_normal((n, 2))
            T = InfluenceSet(rows)
            exact = solve_depth(DepthProblem(influences=T))
            heur = solve_depth(DepthProblem(influences=T), forced)
            assert heur.count == exact.count
            assert heur.certificate == "heuristic_upper_bound"

    def test_positive_scaling_invariance(self, rng):
        rows = rng.standard_normal((15, 4))
        a = solve_depth(DepthProblem(influences=InfluenceSet(rows)), LIGHT)
        b = solve_depth(DepthProblem(influences=InfluenceSet(3.0 * rows)), LIGHT)
        assert a.count == b.count

    def test_count_equals_evaluation_at_witness(self, rng):
        for _ in range(10):
            n, d = int(rng.integers(4, 25)), int(rng.integers(2, 6))
            T = InfluenceSet(rng.standard_normal((n, d)))
            free = np.nonzero(rng.uniform(size=d) < 0.5)[0]
            chan = SlackChannel(kind="box", bound=float(rng.uniform(0, 0.5)), free_idx=free)
            problem = DepthProblem(influences=T, slack=chan)
            result = solve_depth(problem, LIGHT)
            assert result.count == evaluate_01(problem, result.direction, result.slack_value)

    def test_heuristic_not_beaten_by_random_sampling(self, rng):
        for _ in range(5):
            n, d = 25, int(rng.integers(4, 7))
            rows = rng.standard_normal((n, d))
            T = InfluenceSet(rows)
            result = solve_depth(DepthProblem(influences=T), SolverConfig(restarts=32, stages=6, max_iters=80))
            dirs = rng.standard_normal((300, d))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            sample_best = int(np.min(np.sum(rows @ dirs.T >= -1e-12, axis=0)))
            assert result.count <= sample_best

    def test_empty_influences_rejected(self):
        with pytest.raises(ValueError):
            solve_depth(DepthProblem(influences=InfluenceSet(np.zeros((0, 2)))))

    def test_offset_is_shared(self, rng):
        rows = rng.standard_normal((10, 2))
        off = rng.standard_normal(2)
        with_field = solve_depth(DepthProblem(influences=InfluenceSet(rows, offset=off)))
        folded = solve_depth(DepthProblem(influences=InfluenceSet(rows + off)))
        assert with_field.count == folded.count

    def test_zero_dim_direction_space(self, rng):
        from depthforge.geometry import TangentBasis

        T = InfluenceSet(rng.standard_normal((6, 2)))
        basis = TangentBasis(np.zeros((2, 0)))
        result = solve_depth(DepthProblem(influences=T, direction_space=basis))
        assert result.count == 6


class TestSlackStep01:
    def test_zero_bound_forces_zero(self, rng):
        T = InfluenceSet(rng.standard_normal((8, 3)))
        chan = SlackChannel(kind="box", bound=0.0, free_idx=np.array([0, 2]))
        problem = DepthProblem(influences=T, slack=chan)
        s, c = slack_step_01(problem, random_unit(rng, 3))
        assert c == 0.0
        assert np.allclose(s, 0.0)

    def test_matches_grid_sweep(self, rng):
        for _ in range(30):
            n, d = int(rng.integers(3, 20)), 4
            T = InfluenceSet(rng.standard_normal((n, d)))
            free = np.array([0, 2])
            bound = float(rng.uniform(0.1, 3.0))
            one_sided = bool(rng.uniform() < 0.5)
            sign = -1.0 if one_sided else 1.0
            chan = SlackChannel(kind="box", bound=bound, free_idx=free, sign=sign,
                                one_sided=one_sided)
            problem = DepthProblem(influences=T, slack=chan)
            v = random_unit(rng, d)
            s, c = slack_step_01(problem, v)
            args = T.rows @ v
            count = count_closed(args + c)
            u = sign * v[free] / n
            want_count, _ = box_slack_sweep_oracle(args, u, bound, one_sided=one_sided)
            assert count == want_count
            # returned slack realizes the returned shift
            assert np.isclose(chan.shift_of(v, n, s), c)

    def test_dense_support_degenerates(self, rng):
        T = InfluenceSet(rng.standard_normal((6, 3)))
        chan = SlackChannel(kind="box", bound=2.0, free_idx=np.array([], dtype=int))
        problem = DepthProblem(influences=T, slack=chan)
        s, c = slack_step_01(problem, random_unit(rng, 3))
        assert c == 0.0

    def test_unbounded_one_sided_reaches_zero_count(self, rng):
        n = 10
        T = InfluenceSet(np.abs(rng.standard_normal((n, 2))))
        chan = SlackChannel(kind="box", bound=np.inf, free_idx=np.array([0]),
                            sign=-1.0, one_sided=True)
        problem = DepthProblem(influences=T, slack=chan)
        v = np.array([1.0, 0.0])  # positive free coordinate: count can reach 0
        s, c = slack_step_01(problem, v)
        assert count_closed(T.rows @ v + c) == 0
        assert s[0] > 0

    def test_spectral_matches_direct_minimization(self, rng):
        p, m, r, n = 3, 3, 1, 12
        left = np.linalg.qr(rng.standard_normal((p, p - r)))[0]
        right = np.linalg.qr(rng.standard_normal((m, m - r)))[0]
        bound = 0.8
        T = InfluenceSet(rng.standard_normal((n, p * m)))
        chan = SlackChannel(kind="spectral", bound=bound, left=left, right=right,
                            mat_shape=(p, m))
        problem = DepthProblem(influences=T, slack=chan)
        v = random_unit(rng, p * m)
        s, c = slack_step_01(problem, v)
        # the dual range: |shift| <= bound * nuclear(direction block) / n
        M = left.T @ v.reshape((p, m), order="F") @ right
        nuc = np.sum(np.linalg.svd(M, compute_uv=False))
        assert np.isclose(c, -bound * nuc / n)
        assert np.linalg.norm(s, 2) <= bound + 1e-10
        assert np.isclose(chan.shift_of(v, n, s), c)


class TestSlackStepSmooth:
    def test_zero_bound(self, rng):
        T = InfluenceSet(rng.standard_normal((8, 3)))
        chan = SlackChannel(kind="box", bound=0.0, free_idx=np.array([0]))
        problem = DepthProblem(influences=T, slack=chan)
        s = slack_step_smooth(problem, random_unit(rng, 3))
        assert np.allclose(s, 0.0)

    def test_zero_bandwidth_limit_recovers_exact_count(self, rng):
        for _ in range(10):
            n, d = int(rng.integers(4, 15)), 3
            T = InfluenceSet(rng.standard_normal((n, d)))
            chan = SlackChannel(kind="box", bound=1.0, free_idx=np.array([0, 1]))
            problem = DepthProblem(influences=T, slack=chan)
            v = random_unit(rng, d)
            s_smooth = slack_step_smooth(problem, v, sigma=1e-5)
            s_exact, c_exact = slack_step_01(problem, v)
            count_smooth = count_closed(T.rows @ v + chan.shift_of(v, n, s_smooth))
            count_exact = count_closed(T.rows @ v + c_exact)
            assert count_smooth == count_exact

    def test_matches_golden_section_on_shift(self, rng):
        n, d = 12, 3
        T = InfluenceSet(rng.standard_normal((n, d)))
        chan = SlackChannel(kind="box", bound=0.7, free_idx=np.array([1, 2]))
        problem = DepthProblem(influences=T, slack=chan)
        v = random_unit(rng, d)
        sigma = 0.3
        s = slack_step_smooth(problem, v, sigma=sigma)
        got_c = chan.shift_of(v, n, s)
        base = T.rows @ v
        radius = chan.bound * np.sum(np.abs(v[chan.free_idx])) / n

        def obj(c):
            return np.sum(1.0 / (1.0 + np.exp(-(base + c) / sigma)))

        best_c = golden_section(obj, -radius, radius)
        assert abs(got_c - best_c) < 1e-4

    def test_spectral_projection(self, rng):
        p, m, r, n = 4, 3, 1, 10
        left = np.linalg.qr(rng.standard_normal((p, p - r)))[0]
        right = np.linalg.qr(rng.standard_normal((m, m - r)))[0]
        T = InfluenceSet(rng.standard_normal((n, p * m)))
        chan = SlackChannel(kind="spectral", bound=0.5, left=left, right=right,
                            mat_shape=(p, m))
        problem = DepthProblem(influences=T, slack=chan)
        v = random_unit(rng, p * m)
        L = slack_step_smooth(problem, v, sigma=1e-4)
        assert np.linalg.norm(L, 2) <= 0.5 + 1e-8
        # reaches the same shift as the exact dual-extreme step
        _, c_exact = slack_step_01(problem, v)
        assert abs(chan.shift_of(v, n, L) - c_exact) < 1e-3

    def test_requires_channel(self, rng):
        T = InfluenceSet(rng.standard_normal((5, 2)))
        with pytest.raises(ValueError):
            slack_step_smooth(DepthProblem(influences=T), np.array([1.0, 0.0]))


class TestSlackMonotonicity:
    def test_count_nonincreasing_in_bound(self, rng):
        n, d = 15, 3
        rows = rng.standard_normal((n, d))
        free = np.array([0, 1])
        prev = None
        for bound in np.linspace(0.0, 2.0, 9):
            chan = SlackChannel(kind="box", bound=float(bound), free_idx=free)
            problem = DepthProblem(influences=InfluenceSet(rows), slack=chan)
            count = solve_depth(problem, LIGHT).count
            if prev is not None:
                assert count <= prev
            prev = count


class TestOrder2:
    def test_nonnegative_h_factorizes(self, rng):
        n, d = 14, 2
        rows = rng.standard_normal((n, d))
        h = np.abs(rng.standard_normal(n))
        g_set = InfluenceSet(rows)
        result = order2_depth(g_set, h, None)
        angles = np.linspace(0, 2 * np.pi, 3600, endpoint=False)
        best = min(count_halfzero(rows @ np.array([np.cos(a), np.sin(a)])) for a in angles)
        assert result.count == n * best

    def test_all_zero_g(self):
        n = 8
        g_set = InfluenceSet(np.zeros((n, 2)))
        h = np.ones(n)
        result = order2_depth(g_set, h, None)
        # every g_i sits exactly at zero: first factor n/2
        assert result.count == 0.5 * n * n

    def test_vmf_toy_matches_angular_grid(self, rng):
        from depthforge.riemannian import vmf_order2_depth

        mu = np.array([1.0, 0.0])
        Z = np.vstack([random_unit(rng, 2) for _ in range(9)])
        result = vmf_order2_depth(Z, mu)
        h_count = count_closed(Z @ mu)
        tangent = np.array([0.0, 1.0])
        best = min(count_halfzero(Z @ tangent), count_halfzero(-(Z @ tangent)))
        assert result.count == h_count * best

    def test_aggressive_criterion_bounded_by_n(self, rng):
        n = 12
        rows = rng.standard_normal((n, 3))
        h = rng.standard_normal(n)
        result = order2_depth(InfluenceSet(rows), h, None, criterion="order2_aggressive")
        assert 0.0 <= result.count <= n
        assert 0.0 <= result.normalized <= 1.0


class TestSurrogateGradients:
    def test_direction_gradient_matches_fd(self, rng):
        for _ in range(10):
            n, d = int(rng.integers(4, 15)), int(rng.integers(2, 5))
            T = InfluenceSet(rng.standard_normal((n, d)))
            free = np.array([0])
            chan = SlackChannel(kind="box", bound=0.5, free_idx=free)
            problem = DepthProblem(influences=T, slack=chan)
            v = random_unit(rng, d)
            s = np.zeros(d)
            s[0] = 0.3
            sigma = float(rng.uniform(0.05, 1.0))
            _, grad = surrogate_direction_gradient(problem, v, s, sigma)
            fd = np.zeros(d)
            h = 1e-6
            for j in range(d):
                e = np.zeros(d)
                e[j] = h
                vp, _ = surrogate_direction_gradient(problem, v + e, s, sigma)
                vm, _ = surrogate_direction_gradient(problem, v - e, s, sigma)
                fd[j] = (vp - vm) / (2 * h)
            denom = max(np.linalg.norm(grad), 1e-8)
            assert np.linalg.norm(fd - grad) / denom < 1e-5

    def test_slack_gradient_matches_fd(self, rng):
        for _ in range(10):
            n, d = int(rng.integers(4, 15)), 4
            T = InfluenceSet(rng.standard_normal((n, d)))
            free = np.array([1, 3])
            chan = SlackChannel(kind="box", bound=1.0, free_idx=free)
            problem = DepthProblem(influences=T, slack=chan)
            v = random_unit(rng, d)
            s = np.zeros(d)
            s[free] = rng.uniform(-0.5, 0.5, 2)
            sigma = float(rng.uniform(0.05, 1.0))
            _, grad = surrogate_slack_gradient(problem, v, s, sigma)
            fd = np.zeros(2)
            h = 1e-6
            for j, idx in enumerate(free):
                e = np.zeros(d)
                e[idx] = h
                vp, _ = surrogate_slack_gradient(problem, v, s + e, sigma)
                vm, _ = surrogate_slack_gradient(problem, v, s - e, sigma)
                fd[j] = (vp - vm) / (2 * h)
            denom = max(np.linalg.norm(grad), 1e-8)
            assert np.linalg.norm(fd - grad) / denom < 1e-5

    def test_smooth_ramp_gradient_matches_fd(self, rng):
        n, d = 10, 3
        T = InfluenceSet(rng.standard_normal((n, d)))
        problem = DepthProblem(influences=T)
        v = random_unit(rng, d)
        sigma = 0.4
        _, grad = surrogate_direction_gradient(problem, v, None, sigma, name="smooth_ramp")
        fd = np.zeros(d)
        h = 1e-6
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            vp, _ = surrogate_direction_gradient(problem, v + e, None, sigma, name="smooth_ramp")
            vm, _ = surrogate_direction_gradient(problem, v - e, None, sigma, name="smooth_ramp")
            fd[j] = (vp - vm) / (2 * h)
        denom = max(np.linalg.norm(grad), 1e-8)
        assert np.linalg.norm(fd - grad) / denom < 1e-4
