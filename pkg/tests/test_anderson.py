"""Tests for the residual history and regularized Anderson acceleration."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from src.solver.anderson import (
    RankDeficientError,
    ResidualHistory,
    alpha_to_omega,
    omega_to_alpha,
    quasi_newton_extrapolate,
    raa_step,
    run_raa,
)
from src.solver.linalg import DimensionMismatchError
from src.solver.models import RunStatus, StoppingRule


def linear_contraction(dim=5, rate=0.9, seed=1):
    """T(y) = A y + c with ||A|| = rate, and its fixed point."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    A = rate * Q @ np.diag(np.linspace(1.0, 0.2, dim)) @ Q.T
    c = rng.standard_normal(dim)
    fixed_point = np.linalg.solve(np.eye(dim) - A, c)
    return (lambda y: A @ y + c), fixed_point


class TestResidualHistory:
    def test_capacity_bounds_window(self):
        history = ResidualHistory(2)
        for i in range(5):
            history.push(np.full(3, float(i)), np.full(3, 10.0 + i))

        assert len(history) == 3
        assert history.depth == 2
        assert history.pushes == 5
        assert_allclose(history.residual_matrix()[0], [2.0, 3.0, 4.0])
        assert_allclose(history.latest_snapshot, np.full(3, 14.0))

    def test_incremental_gram_matches_direct(self, rng):
        history = ResidualHistory(3)
        for _ in range(9):
            history.push(rng.standard_normal(6), rng.standard_normal(6))
            R = history.residual_matrix()
            assert_allclose(history.gram(), R.T @ R, rtol=1e-12, atol=1e-12)

    def test_push_rejects_mismatched_vectors(self):
        history = ResidualHistory(2)
        with pytest.raises(DimensionMismatchError):
            history.push(np.ones(3), np.ones(2))
        history.push(np.ones(3), np.ones(3))
        with pytest.raises(DimensionMismatchError):
            history.push(np.ones(4), np.ones(4))

    def test_clear_and_empty_weights(self):
        history = ResidualHistory(1)
        history.push(np.ones(2), np.ones(2))
        history.clear()
        assert len(history) == 0
        with pytest.raises(ValueError):
            history.weights(0.0)

    def test_combine_checks_weight_count(self):
        history = ResidualHistory(2)
        history.push(np.ones(2), np.ones(2))
        with pytest.raises(DimensionMismatchError):
            history.combine(np.array([0.5, 0.5]))

    def test_capacity_must_be_positive(self):
        with pytest.raises(ValueError):
            ResidualHistory(0)


class TestRaa:
    def test_converges_faster_than_picard(self):
        T, fixed_point = linear_contraction()
        stopping = StoppingRule(400, tol=1e-8)
        trace = run_raa(T, np.zeros(5), m=5, xi=1e-10, stopping=stopping)
        picard_iterations = 0
        y = np.zeros(5)
        while np.linalg.norm(y - T(y)) > 1e-8:
            y = T(y)
            picard_iterations += 1

        assert trace.status is RunStatus.CONVERGED
        assert trace.iterations < 100
        assert trace.iterations < picard_iterations
        assert_allclose(trace.y, fixed_point, atol=1e-6)

    def test_residual_norms_recorded(self):
        T, _ = linear_contraction()
        trace = run_raa(T, np.zeros(5), m=2, xi=1e-6, stopping=StoppingRule(10))
        assert len(trace.residual_norms) == 10
        expected = 1e8 * (1.0 + trace.residual_norms[0])
        assert trace.divergence_threshold == pytest.approx(expected)

    def test_non_finite_map_reports_divergence(self):
        trace = run_raa(lambda y: y + np.nan, np.zeros(3), m=2, xi=0.0)
        assert trace.status is RunStatus.DIVERGED
        assert trace.diverged
        assert trace.iterations == 0

    def test_threshold_exceeded_reports_divergence(self):
        calls = {"n": 0}

        def T(y):
            calls["n"] += 1
            return y - 10.0 ** calls["n"]

        trace = run_raa(T, np.zeros(2), m=1, xi=0.0, divergence_factor=5.0)
        assert trace.status is RunStatus.DIVERGED

    def test_observer_stops_run(self):
        T, _ = linear_contraction()
        stopping = StoppingRule(100, observer=lambda n, y, info: n == 3)
        trace = run_raa(T, np.zeros(5), m=2, xi=1e-6, stopping=stopping)
        assert trace.status is RunStatus.STOPPED
        assert trace.iterations == 3

    def test_raa_step_degenerate_returns_latest_output(self):
        history = ResidualHistory(2)
        history.push(np.zeros(2), np.array([1.0, 2.0]))
        history.push(np.zeros(2), np.array([3.0, 4.0]))
        y_next, weights = raa_step(history, np.array([3.0, 4.0]), xi=0.0)

        assert weights.degenerate
        assert_allclose(y_next, [3.0, 4.0])


    def test_first_step_returns_map_output(self):
        history = ResidualHistory(3)
        x = np.array([0.5, -1.0])
        history.push(np.array([0.5, 2.0]), x)
        y_next, weights = raa_step(history, x, xi=1e-5)
        assert_allclose(y_next, x)
        assert_allclose(weights.alpha, [1.0])

    def test_scalar_halving_map_hits_fixed_point(self):
        # collinear residuals 0.5 and 0.25 cancel with alpha = (-1, 2)
        trace = run_raa(
            lambda y: y / 2.0, np.array([1.0]), m=1, xi=0.0, stopping=StoppingRule(max_iters=2)
        )
        assert trace.iterations == 2
        assert abs(trace.y[0]) <= 1e-12

    def test_halving_map_reaches_tight_tolerance(self):
        trace = run_raa(
            lambda y: y / 2.0,
            np.ones(4),
            m=3,
            xi=1e-5,
            stopping=StoppingRule(max_iters=60, tol=1e-10),
        )
        assert trace.status is RunStatus.CONVERGED
        assert trace.residual_norms[-1] <= 1e-10

    def test_start_at_fixed_point_stays_there(self):
        T, fixed_point = linear_contraction()
        trace = run_raa(T, fixed_point, m=4, xi=1e-6, stopping=StoppingRule(max_iters=5))
        assert_allclose(trace.y, fixed_point, atol=1e-9)


class TestQuasiNewtonForm:
    """Constrained least squares equals the multisecant update when xi = 0."""

    def test_equivalence_on_random_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            dim = int(rng.integers(8, 21))
            m = int(rng.integers(1, 6))
            history = ResidualHistory(m)
            for _ in range(m + 1):
                history.push(rng.standard_normal(dim), rng.standard_normal(dim))

            weights = history.weights(0.0)
            assert not weights.degenerate
            extrapolated = history.combine(weights.alpha)

            r_n = history.latest_residual
            y_n = history.latest_snapshot + r_n
            multisecant = quasi_newton_extrapolate(history, y_n, r_n)

            scale = max(1.0, np.linalg.norm(extrapolated))
            assert np.linalg.norm(extrapolated - multisecant) <= 1e-8 * scale

    def test_rank_deficient_differences_rejected(self):
        history = ResidualHistory(2)
        r = np.array([1.0, 0.0, 0.0])
        for k in range(3):
            history.push(k * r, np.zeros(3))
        with pytest.raises(RankDeficientError):
            quasi_newton_extrapolate(history, np.zeros(3), history.latest_residual)

    def test_scalar_secant_step(self):
        # x = (2, 1.5), r = (1, 0.25): secant weights (-1/3, 4/3)
        history = ResidualHistory(1)
        history.push(np.array([1.0]), np.array([2.0]))
        history.push(np.array([0.25]), np.array([1.5]))
        y_next = quasi_newton_extrapolate(history, np.array([1.75]), np.array([0.25]))
        assert y_next[0] == pytest.approx(4.0 / 3.0)

    def test_single_entry_is_plain_step(self):
        history = ResidualHistory(2)
        x, r = np.array([1.0, 2.0]), np.array([0.5, -0.5])
        history.push(r, x)
        assert_allclose(quasi_newton_extrapolate(history, x + r, r), x)

    @settings(max_examples=100, deadline=None)
    @given(
        raw=st.lists(
            st.floats(min_value=-5, max_value=5, allow_nan=False), min_size=1, max_size=6
        )
    )
    def test_alpha_omega_round_trip(self, raw):
        alpha = np.array(raw + [1.0 - sum(raw)])
        assert_allclose(omega_to_alpha(alpha_to_omega(alpha)), alpha, atol=1e-9)
