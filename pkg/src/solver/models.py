"""
Data models shared by the splitting solvers.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np

Vector = np.ndarray

# observer(n, point, info) -> True to stop the run
Observer = Callable[[int, object, Optional["IterationInfo"]], bool]


class RunStatus(Enum):
    """Terminal state of an iterative run."""

    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    DIVERGED = "diverged"
    STOPPED = "stopped"


class EvaluationMode(Enum):
    """How the primal-dual solver obtains L-images and M-norms."""

    RECURSIVE = "recursive"
    DIRECT = "direct"


@dataclass
class ParameterSchedule:
    """Step sizes, relaxations and deviation factors indexed by iteration."""

    epsilon: float
    gamma: Callable[[int], float]
    lam: Callable[[int], float]
    zeta: Callable[[int], float]
    beta: float = 0.0

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")

    @classmethod
    def constant(
        cls,
        gamma: float,
        lam: float = 1.0,
        zeta: float = 0.99,
        epsilon: float = 0.01,
        beta: float = 0.0,
    ) -> "ParameterSchedule":
        """Build a schedule whose sequences are all constant."""
        return cls(
            epsilon=epsilon,
            gamma=lambda n: gamma,
            lam=lambda n: lam,
            zeta=lambda n: zeta,
            beta=beta,
        )

    def at(self, n: int) -> Tuple[float, float, float]:
        """Return (gamma_n, lambda_n, zeta_n)."""
        return float(self.gamma(n)), float(self.lam(n)), float(self.zeta(n))


@dataclass
class StoppingRule:
    """When an iterative run ends."""

    max_iters: int = 1000
    tol: Optional[float] = None
    observer: Optional[Observer] = None
    keep_iterates: bool = False
    log_every: Optional[int] = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol is not None and self.tol < 0:
            raise ValueError("tol must be nonnegative")
        if self.log_every is not None and self.log_every < 1:
            raise ValueError("log_every must be at least 1")

    def should_log(self, n: int) -> bool:
        """True on iterations where DEBUG diagnostics are due."""
        return self.log_every is not None and n % self.log_every == 0


@dataclass
class FbState:
    """Iterate bundle of the forward-backward engine; y = x + u."""

    x: Vector
    y: Vector
    u: Vector
    n: int
    p: Optional[Vector] = None


@dataclass
class IterationInfo:
    """Diagnostics emitted once per iteration."""

    n: int
    ell_sq: float = 0.0
    deviation_norm_sq: float = 0.0
    slack: float = 0.0
    residual_norm: Optional[float] = None
    lyapunov: Optional[float] = None
    degenerate_weights: bool = False
    cache_vectors: Optional[int] = None


@dataclass
class FbTrace:
    """Outcome of a single-space forward-backward run."""

    x: Vector
    y: Vector
    iterations: int
    status: RunStatus
    states: List[FbState] = field(default_factory=list)
    infos: List[IterationInfo] = field(default_factory=list)


@dataclass
class ExtrapolationWeights:
    """Affine weights alpha with sum(alpha) == 1."""

    alpha: Vector
    degenerate: bool = False
    bordered: bool = False

    @classmethod
    def latest_only(cls, size: int) -> "ExtrapolationWeights":
        """No-extrapolation fallback e_last."""
        alpha = np.zeros(size)
        alpha[-1] = 1.0
        return cls(alpha=alpha, degenerate=True)


@dataclass
class SpectralNormEstimate:
    """Power-iteration estimate of an operator norm."""

    value: float
    iterations: int
    converged: bool


@dataclass
class PrimalDualPoint:
    """Primal-dual pair z = (x, mu)."""

    x: Vector
    mu: Vector

    @property
    def n_primal(self) -> int:
        return int(self.x.shape[0])

    @property
    def n_dual(self) -> int:
        return int(self.mu.shape[0])

    def as_vector(self) -> Vector:
        return np.concatenate([self.x, self.mu])

    @classmethod
    def from_vector(cls, v: Vector, n_primal: int) -> "PrimalDualPoint":
        return cls(x=v[:n_primal], mu=v[n_primal:])

    @classmethod
    def full(cls, n_primal: int, n_dual: int, value: float = 0.0) -> "PrimalDualPoint":
        return cls(x=np.full(n_primal, value), mu=np.full(n_dual, value))

    def copy(self) -> "PrimalDualPoint":
        return PrimalDualPoint(x=self.x.copy(), mu=self.mu.copy())

    def __sub__(self, other: "PrimalDualPoint") -> "PrimalDualPoint":
        return PrimalDualPoint(x=self.x - other.x, mu=self.mu - other.mu)


@dataclass
class DwifobConfig:
    """Inputs of the dynamically weighted inertial FB scheme."""

    m: int
    xi: float
    schedule: ParameterSchedule
    eps_scale: float = 0.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"memory m must be at least 1, got {self.m}")
        if not np.isfinite(self.xi) or self.xi < 0:
            raise ValueError(f"xi must be finite and nonnegative, got {self.xi}")
        if self.eps_scale < 0:
            raise ValueError(f"eps_scale must be nonnegative, got {self.eps_scale}")


@dataclass
class PdTrace:
    """Outcome of a primal-dual run."""

    z: PrimalDualPoint
    iterations: int
    status: RunStatus
    infos: List[IterationInfo] = field(default_factory=list)
    last_dx: float = float("inf")
    last_dmu: float = float("inf")
    degenerate_count: int = 0
    cache_drift: List[Tuple[int, float]] = field(default_factory=list)
