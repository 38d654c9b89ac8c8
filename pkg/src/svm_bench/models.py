"""
Data models for the SVM benchmark harness.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from ..solver.anderson import DIVERGENCE_FACTOR
from ..solver.fb_core import validate_params
from ..solver.linalg import LinearOperatorHandle
from ..solver.models import ParameterSchedule, PrimalDualPoint
from ..solver.primal_dual import PrimalDualProblem


ALGORITHMS = ("cp", "pd_dwifob", "raa")
STEP_RULES = ("over_norm", "over_norm_sq")
MODES = ("recursive", "direct")
COST_MODELS = ("deterministic", "wallclock")

EXIT_CODES = {"converged": 0, "max_iters": 2, "diverged": 3}


@dataclass
class SvmDataset:
    """Binary classification samples with labels normalized to +-1."""

    theta: sp.csr_matrix
    phi: np.ndarray
    source: Optional[str] = None
    label_values: Tuple[float, ...] = ()

    def __post_init__(self):
        self.theta = sp.csr_matrix(self.theta, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        n_samples, n_features = self.theta.shape
        if n_samples < 1 or n_features < 1:
            raise ValueError(
                f"Dataset needs at least one sample and feature, got {self.theta.shape}"
            )
        if self.phi.shape != (n_samples,):
            raise ValueError(f"{self.phi.shape[0]} labels for {n_samples} samples")
        if not np.all(np.abs(self.phi) == 1.0):
            raise ValueError("Labels must be +1 or -1")

    @property
    def n_samples(self) -> int:
        return int(self.theta.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.theta.shape[1])

    def content_hash(self) -> str:
        """sha256 over the canonical CSR arrays and labels."""
        theta = self.theta.copy()
        theta.sum_duplicates()
        theta.sort_indices()
        digest = hashlib.sha256()
        digest.update(np.asarray(theta.shape, dtype=np.int64).tobytes())
        digest.update(theta.indptr.astype(np.int64).tobytes())
        digest.update(theta.indices.astype(np.int64).tobytes())
        digest.update(theta.data.astype(np.float64).tobytes())
        digest.update(self.phi.astype(np.float64).tobytes())
        return digest.hexdigest()

    def __str__(self) -> str:
        name = Path(self.source).name if self.source else "dataset"
        return f"{name} (N={self.n_samples}, d={self.n_features})"


@dataclass
class SvmProblem:
    """l1-regularized hinge-loss SVM as a primal-dual inclusion; x = (w, b), bias last."""

    dataset: SvmDataset
    delta: float
    L: LinearOperatorHandle
    pd_problem: PrimalDualProblem

    @property
    def n_primal(self) -> int:
        return self.dataset.n_features + 1

    @property
    def n_dual(self) -> int:
        return self.dataset.n_samples


@dataclass
class OptimalityReport:
    """Largest violations of the saddle-point membership conditions."""

    primal_violation: float
    bias_violation: float
    dual_violation: float

    @property
    def max_violation(self) -> float:
        return max(self.primal_violation, self.bias_violation, self.dual_violation)

    def satisfied(self, tol: float = 1e-10) -> bool:
        return self.max_violation <= tol


@dataclass
class ReferenceSolution:
    """High-accuracy Chambolle-Pock solution used as (x*, mu*)."""

    point: PrimalDualPoint
    achieved_dx: float
    achieved_dmu: float
    iterations: int
    converged: bool
    from_cache: bool = False


@dataclass
class BenchConfig:
    """One benchmark run; keys double as the JSON config-file schema."""

    dataset: str
    delta: float = 0.5
    algorithm: str = "pd_dwifob"
    m: int = 5
    xi: float = 1e-5
    lam: float = 1.0
    zeta: float = 0.99
    epsilon: float = 0.01
    eps_scale: float = 0.0
    step_rule: str = "over_norm"
    mode: str = "recursive"
    init_scale: float = 0.0
    tol: float = 1e-8
    max_iters: int = 100000
    seed: int = 0
    cost_model: str = "deterministic"
    warmup: int = 50
    baseline_iters: int = 500
    reference_tol: float = 1e-15
    reference_max_iters: int = 10_000_000
    objective_every: int = 0
    record_lyapunov: bool = False
    audit_period: Optional[int] = None
    log_every: Optional[int] = None
    divergence_factor: float = DIVERGENCE_FACTOR

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"Unknown algorithm '{self.algorithm}'; choose from {ALGORITHMS}")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"Unknown step rule '{self.step_rule}'; choose from {STEP_RULES}")
        if self.mode not in MODES:
            raise ValueError(f"Unknown mode '{self.mode}'; choose from {MODES}")
        if self.cost_model not in COST_MODELS:
            raise ValueError(f"Unknown cost model '{self.cost_model}'; choose from {COST_MODELS}")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.algorithm != "cp" and self.m < 1:
            raise ValueError(f"memory must be at least 1 for {self.algorithm}, got {self.m}")
        if self.xi < 0:
            raise ValueError(f"xi must be nonnegative, got {self.xi}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.init_scale < 0:
            raise ValueError(f"init_scale must be nonnegative, got {self.init_scale}")
        if not self.divergence_factor > 0:
            raise ValueError(f"divergence_factor must be positive, got {self.divergence_factor}")

    @classmethod
    def from_file(cls, path: Path, **overrides: Any) -> "BenchConfig":
        """Load a JSON config file; explicit overrides win over file values."""
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unknown config keys in {path}: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def schedule(self, tau: float) -> ParameterSchedule:
        """Constant schedule with gamma = tau; the margin epsilon never exceeds tau."""
        return ParameterSchedule.constant(
            gamma=tau, lam=self.lam, zeta=self.zeta, epsilon=min(self.epsilon, tau)
        )

    def validation_errors(self, tau: float) -> List[str]:
        if self.algorithm != "pd_dwifob":
            return []
        return validate_params(self.schedule(tau), horizon=1)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @property
    def label(self) -> str:
        if self.algorithm == "cp":
            return "cp"
        if self.algorithm == "raa":
            return f"raa m={self.m} xi={self.xi:g}"
        return f"pd_dwifob m={self.m} xi={self.xi:g} {self.mode}"


@dataclass
class IterationRecord:
    """Per-iteration diagnostics of a benchmark run."""

    n: int
    wall_ns: int
    m_dist: float
    m_dist_normalized: float
    model_cost: float = 0.0
    scaled_n: Optional[float] = None
    V_n: Optional[float] = None
    slack: Optional[float] = None
    objective: Optional[float] = None
    flags: str = ""


@dataclass
class BenchSummary:
    """Headline numbers of a benchmark run."""

    algorithm: str
    dataset: str
    status: str
    iterations: int
    iterations_to_tol: Optional[int]
    cost_ratio: float
    scaled_iterations_to_tol: Optional[float]
    final_m_dist_normalized: float
    final_objective: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES.get(self.status, 1)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


@dataclass
class BenchmarkResult:
    """Records and summary of one run."""

    config: BenchConfig
    records: List[IterationRecord]
    summary: BenchSummary


class BenchmarkError(RuntimeError):
    """Raised for harness misuse such as a missing baseline or an unusable dataset."""

    pass
