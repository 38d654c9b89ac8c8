"""Tests for forward-backward splitting with deviations."""

import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.solver.dwifob import DwifobPolicy
from src.solver.fb_core import (
    NORM_CONDITION_SLACK,
    DeviationPolicy,
    InclusionProblem,
    MetricError,
    MetricHandle,
    MomentumDeviation,
    ParameterError,
    SolverDivergenceError,
    ZeroDeviation,
    budget_coefficients,
    deviation_budget,
    enforce_norm_condition,
    fb_step,
    relax,
    run_fb_with_deviations,
    validate_params,
)
from src.solver.linalg import DimensionMismatchError
from src.solver.models import FbState, ParameterSchedule, RunStatus, StoppingRule
from src.solver.operators import ResolventOperator, affine_resolvent, linear_cocoercive


def quadratic_problem(seed=0, n=6):
    """0 in (Q1 x - q) + Q2 x with both parts positive definite; returns problem and x*."""
    rng = np.random.default_rng(seed)
    B1 = rng.standard_normal((n, n))
    B2 = rng.standard_normal((n, n))
    Q1 = B1 @ B1.T / n + 0.1 * np.eye(n)
    Q2 = B2 @ B2.T / n
    q = rng.standard_normal(n)
    problem = InclusionProblem(resolvent=affine_resolvent(Q1, -q), forward=linear_cocoercive(Q2))
    return problem, np.linalg.solve(Q1 + Q2, q)


class HugeDeviation(DeviationPolicy):
    """Proposes a direction far outside any budget."""

    def propose(self, context):
        return 1e6 * np.ones_like(context.x_next)


class TestValidateParams:
    def test_admissible_constant_schedule(self):
        schedule = ParameterSchedule.constant(gamma=1.0, lam=1.0, zeta=0.99, epsilon=0.01)
        assert validate_params(schedule, horizon=5) == []

    def test_step_above_cocoercive_bound(self):
        schedule = ParameterSchedule.constant(gamma=3.99, lam=0.5, epsilon=0.01, beta=1.0)
        violations = validate_params(schedule, horizon=1)
        assert any("gamma" in v for v in violations)

    def test_relaxation_bound_depends_on_step(self):
        # lambda <= 2 - gamma beta / 2 - eps / 2 = 0.995
        schedule = ParameterSchedule.constant(gamma=2.0, lam=1.0, epsilon=0.01, beta=1.0)
        assert any("lambda" in v for v in validate_params(schedule, horizon=1))

    def test_zeta_must_stay_below_one_minus_eps(self):
        schedule = ParameterSchedule.constant(gamma=1.0, zeta=1.0, epsilon=0.01)
        assert any("zeta" in v for v in validate_params(schedule, horizon=1))

    def test_epsilon_must_be_positive(self):
        schedule = ParameterSchedule.constant(gamma=1.0, epsilon=0.0)
        assert any("epsilon" in v for v in validate_params(schedule, horizon=1))

    def test_varying_schedule_checked_per_index(self):
        schedule = ParameterSchedule(
            epsilon=0.01,
            gamma=lambda n: 1.0,
            lam=lambda n: 1.0 if n < 3 else 2.5,
            zeta=lambda n: 0.5,
        )
        violations = validate_params(schedule, horizon=4)
        assert [v.split(":")[0] for v in violations] == ["n=3", "n=4"]


class TestStepPrimitives:
    def test_unit_relaxation_lands_on_p(self):
        x, y, p = np.array([1.0, 2.0]), np.array([1.0, 2.0]), np.array([0.3, -0.7])
        assert np.array_equal(relax(x, y, p, 1.0), p)

    def test_general_relaxation(self):
        x, y, p = np.array([1.0]), np.array([2.0]), np.array([0.0])
        assert_allclose(relax(x, y, p, 0.5), [0.0])

    def test_fb_step_without_forward_term(self):
        state = FbState(x=np.zeros(2), y=np.array([4.0, -4.0]), u=np.array([4.0, -4.0]), n=0)
        J = ResolventOperator(evaluate=lambda v, step: v / (1.0 + step), descriptor="test")
        p, x_next = fb_step(state, J, linear_cocoercive(np.zeros((2, 2))), 1.0, 1.0)
        assert_allclose(p, [2.0, -2.0])
        assert_allclose(x_next, [-2.0, 2.0])

    def test_budget_coefficients_unit_relaxation(self):
        assert budget_coefficients(1.0, 1.0, 1.0, 1.0, 0.0) == (1.0, 0.0)

    def test_budget_coefficients_over_relaxation(self):
        scale, inner = budget_coefficients(1.0, 1.0, 1.5, 1.5, 0.0)
        assert scale == pytest.approx(0.25)
        assert inner == pytest.approx(1.0)

    def test_budget_rejects_relaxation_of_two(self):
        with pytest.raises(ParameterError):
            budget_coefficients(1.0, 1.0, 2.0, 1.0, 0.0)

    def test_deviation_budget_includes_previous_deviation(self):
        metric = MetricHandle.euclidean()
        p, x, u = np.array([1.0, 0.0]), np.zeros(2), np.array([0.0, 2.0])
        ell_sq = deviation_budget(p, x, u, metric, 1.0, 1.0, 1.5, 1.5, 0.0)
        # 0.25 * ||(1, 0) + 1 * (0, 2)||^2
        assert ell_sq == pytest.approx(0.25 * 5.0)

    def test_enforce_norm_condition_accepts_within_bound(self):
        u_hat = np.array([0.3, 0.4])
        u, norm_sq = enforce_norm_condition(u_hat, 1.0, MetricHandle.euclidean())
        assert u is u_hat
        assert norm_sq == pytest.approx(0.25)

    def test_enforce_norm_condition_rescales(self):
        u, norm_sq = enforce_norm_condition(np.array([3.0, 4.0]), 1.0, MetricHandle.euclidean())
        assert_allclose(u, [0.6, 0.8])
        assert norm_sq == pytest.approx(1.0)


class TestMetricHandle:
    def test_from_matrix_rejects_non_symmetric(self):
        with pytest.raises(MetricError):
            MetricHandle.from_matrix(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_from_matrix_rejects_indefinite(self):
        with pytest.raises(MetricError):
            MetricHandle.from_matrix(np.diag([1.0, -1.0]))

    def test_from_matrix_norm(self):
        metric = MetricHandle.from_matrix(np.diag([4.0, 1.0]))
        assert metric.norm(np.array([1.0, 1.0])) == pytest.approx(np.sqrt(5.0))
        assert metric.rho == pytest.approx(1.0)

    def test_from_inner_samples_positivity(self):
        metric = MetricHandle.from_inner(lambda u, v: float(2.0 * u @ v), dim=3)
        assert metric.rho == pytest.approx(2.0)


class TestRunFbWithDeviations:
    """Convergence and the norm condition on a strongly monotone quadratic."""

    @pytest.fixture
    def setup(self):
        problem, x_star = quadratic_problem()
        beta = problem.forward.beta
        schedule = ParameterSchedule.constant(gamma=1.0 / beta, lam=1.0, zeta=0.99, beta=beta)
        assert validate_params(schedule, horizon=1) == []
        return problem, x_star, schedule

    @pytest.mark.parametrize(
        "policy", [ZeroDeviation(), MomentumDeviation(), DwifobPolicy(m=3, xi=1e-8)]
    )
    def test_converges_to_solution(self, setup, policy):
        problem, x_star, schedule = setup
        trace = run_fb_with_deviations(
            problem,
            np.zeros_like(x_star),
            policy,
            schedule,
            MetricHandle.euclidean(),
            StoppingRule(max_iters=20000, tol=1e-12),
        )
        assert trace.status is RunStatus.CONVERGED
        assert_allclose(trace.x, x_star, atol=1e-9)

    def test_norm_condition_every_iteration(self, setup):
        problem, x_star, schedule = setup
        trace = run_fb_with_deviations(
            problem,
            10.0 * np.ones_like(x_star),
            HugeDeviation(),
            schedule,
            MetricHandle.euclidean(),
            StoppingRule(max_iters=2000),
        )
        for info in trace.infos:
            bound_sq = 0.99**2 * info.ell_sq
            assert info.deviation_norm_sq <= bound_sq + NORM_CONDITION_SLACK * max(1.0, bound_sq)
        start_error = np.linalg.norm(10.0 * np.ones_like(x_star) - x_star)
        assert np.linalg.norm(trace.x - x_star) < 0.5 * start_error

    def test_observer_sees_every_iterate_and_can_stop(self, setup):
        problem, x_star, schedule = setup
        seen = []

        def observer(n, x, info):
            seen.append((n, info is None))
            return n == 4

        trace = run_fb_with_deviations(
            problem,
            np.zeros_like(x_star),
            ZeroDeviation(),
            schedule,
            MetricHandle.euclidean(),
            StoppingRule(max_iters=100, observer=observer),
        )
        assert trace.status is RunStatus.STOPPED
        assert trace.iterations == 4
        assert seen == [(0, True), (1, False), (2, False), (3, False), (4, False)]

    def test_keep_iterates(self, setup):
        problem, x_star, schedule = setup
        trace = run_fb_with_deviations(
            problem,
            np.zeros_like(x_star),
            MomentumDeviation(),
            schedule,
            MetricHandle.euclidean(),
            StoppingRule(max_iters=5, keep_iterates=True),
        )
        assert [s.n for s in trace.states] == [0, 1, 2, 3, 4, 5]
        for state in trace.states:
            assert_allclose(state.y, state.x + state.u)

    def test_debug_diagnostics_every_log_every(self, setup, caplog):
        problem, x_star, schedule = setup
        with caplog.at_level(logging.DEBUG, logger="src.solver.fb_core"):
            run_fb_with_deviations(
                problem,
                np.zeros_like(x_star),
                MomentumDeviation(),
                schedule,
                MetricHandle.euclidean(),
                StoppingRule(max_iters=10, log_every=4),
            )
        lines = [r.getMessage() for r in caplog.records if "FB iteration" in r.getMessage()]
        assert [line.split(":")[0] for line in lines] == ["FB iteration 4", "FB iteration 8"]

    def test_no_diagnostics_without_log_every(self, setup, caplog):
        problem, x_star, schedule = setup
        with caplog.at_level(logging.DEBUG, logger="src.solver.fb_core"):
            run_fb_with_deviations(
                problem,
                np.zeros_like(x_star),
                ZeroDeviation(),
                schedule,
                MetricHandle.euclidean(),
                StoppingRule(max_iters=10),
            )
        assert not any("FB iteration" in r.getMessage() for r in caplog.records)

    def test_log_every_must_be_positive(self):
        with pytest.raises(ValueError):
            StoppingRule(log_every=0)

    def test_non_finite_iterate_raises(self, setup):
        _, x_star, schedule = setup
        broken = InclusionProblem(
            resolvent=ResolventOperator(lambda v, step: v * np.nan, "broken"),
            forward=linear_cocoercive(np.eye(len(x_star))),
        )
        with pytest.raises(SolverDivergenceError) as excinfo:
            run_fb_with_deviations(
                broken, np.ones_like(x_star), ZeroDeviation(), schedule, MetricHandle.euclidean()
            )
        assert excinfo.value.iteration == 0
        assert excinfo.value.quantity == "p"

    def test_wrong_deviation_shape_raises(self, setup):
        problem, x_star, schedule = setup

        class ShortDeviation(DeviationPolicy):
            def propose(self, context):
                return np.zeros(1)

        with pytest.raises(DimensionMismatchError):
            run_fb_with_deviations(
                problem, np.ones_like(x_star), ShortDeviation(), schedule, MetricHandle.euclidean()
            )
