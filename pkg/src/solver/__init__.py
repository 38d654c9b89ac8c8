"""
Monotone-inclusion solvers: forward-backward splitting with deviations,
regularized Anderson acceleration, DWIFOB and its primal-dual variant.
"""

from .anderson import (
    RankDeficientError,
    ResidualHistory,
    quasi_newton_extrapolate,
    raa_step,
    run_raa,
)
from .dwifob import DwifobPolicy, dwifob_candidate, run_dwifob, scale_deviation
from .fb_core import (
    InclusionProblem,
    MetricError,
    MetricHandle,
    MomentumDeviation,
    ParameterError,
    SolverDivergenceError,
    ZeroDeviation,
    deviation_budget,
    fb_step,
    run_fb_with_deviations,
    validate_params,
)
from .linalg import (
    CountingOperator,
    DimensionMismatchError,
    LinearOperatorHandle,
    estimate_spectral_norm,
    solve_extrapolation_weights,
)
from .models import (
    DwifobConfig,
    EvaluationMode,
    ParameterSchedule,
    PrimalDualPoint,
    RunStatus,
    StoppingRule,
)
from .operators import OperatorError, prox_l1_skip_last, resolvent_hinge_conjugate
from .primal_dual import (
    PdMetric,
    PrimalDualProblem,
    cp_step,
    lyapunov_V,
    pd_metric_norm_sq,
    pd_resolvent_pair,
    run_cp,
    run_pd_dwifob,
)

__all__ = [
    "CountingOperator",
    "DimensionMismatchError",
    "DwifobConfig",
    "DwifobPolicy",
    "EvaluationMode",
    "InclusionProblem",
    "LinearOperatorHandle",
    "MetricError",
    "MetricHandle",
    "MomentumDeviation",
    "OperatorError",
    "ParameterError",
    "ParameterSchedule",
    "PdMetric",
    "PrimalDualPoint",
    "PrimalDualProblem",
    "RankDeficientError",
    "ResidualHistory",
    "RunStatus",
    "SolverDivergenceError",
    "StoppingRule",
    "ZeroDeviation",
    "cp_step",
    "deviation_budget",
    "dwifob_candidate",
    "estimate_spectral_norm",
    "fb_step",
    "lyapunov_V",
    "pd_metric_norm_sq",
    "pd_resolvent_pair",
    "prox_l1_skip_last",
    "quasi_newton_extrapolate",
    "raa_step",
    "resolvent_hinge_conjugate",
    "run_cp",
    "run_dwifob",
    "run_fb_with_deviations",
    "run_pd_dwifob",
    "scale_deviation",
    "solve_extrapolation_weights",
    "validate_params",
]
