"""
High-accuracy reference solutions and their on-disk cache.

References come from long Chambolle-Pock runs started at the origin and stopped
when both successive-difference norms drop to the tolerance. They are stored as
NumPy ``.npz`` files keyed by the dataset content, delta, step sizes and tolerance;
concurrent processes serialize on an advisory lock per key.
"""

import fcntl
import hashlib
import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Iterator, Optional

import numpy as np
from tenacity import Retrying, retry_if_exception_type, stop_after_delay, wait_exponential
from tqdm import tqdm

from ..solver.models import PrimalDualPoint, RunStatus, StoppingRule
from ..solver.primal_dual import PdMetric, run_cp
from .models import ReferenceSolution, SvmProblem
from .problem import initial_point
from .utils import cache_dir, ensure_directory


logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-15
DEFAULT_MAX_ITERS = 10_000_000
PROGRESS_EVERY = 10_000
CACHE_KEYS = (
    "n_primal",
    "n_dual",
    "x",
    "mu",
    "achieved_dx",
    "achieved_dmu",
    "iterations",
    "converged",
)


class ReferenceCacheError(RuntimeError):
    """Raised for unreadable cache files or lock timeouts."""

    pass


class ReferenceCache:
    """Directory of cached reference solutions."""

    def __init__(self, directory: Optional[Path] = None, lock_timeout: float = 3600.0):
        self.directory = Path(directory) if directory is not None else cache_dir()
        self.lock_timeout = lock_timeout

    @staticmethod
    def key(dataset_hash: str, delta: float, tau: float, sigma: float, tol: float) -> str:
        material = f"{dataset_hash}|{delta!r}|{tau!r}|{sigma!r}|{tol!r}"
        return hashlib.sha256(material.encode("utf-8")).hexdigest()

    def path_for(self, key: str) -> Path:
        return self.directory / f"reference-{key[:32]}.npz"

    def load(self, key: str) -> Optional[ReferenceSolution]:
        """
        Read a cached solution.

        Returns:
            The solution, or None when no file exists for the key

        Raises:
            ReferenceCacheError: If the file exists but is malformed
        """
        path = self.path_for(key)
        if not path.exists():
            return None

        try:
            with np.load(path, allow_pickle=False) as data:
                missing = [k for k in CACHE_KEYS if k not in data.files]
                if missing:
                    raise ReferenceCacheError(f"{path} lacks fields {missing}")
                n_primal, n_dual = int(data["n_primal"]), int(data["n_dual"])
                x, mu = np.array(data["x"]), np.array(data["mu"])
                if x.shape != (n_primal,) or mu.shape != (n_dual,):
                    raise ReferenceCacheError(f"{path} has inconsistent dimensions")
                solution = ReferenceSolution(
                    point=PrimalDualPoint(x=x, mu=mu),
                    achieved_dx=float(data["achieved_dx"]),
                    achieved_dmu=float(data["achieved_dmu"]),
                    iterations=int(data["iterations"]),
                    converged=bool(data["converged"]),
                    from_cache=True,
                )
        except (OSError, ValueError, KeyError) as e:
            raise ReferenceCacheError(f"Could not read reference cache {path}: {e}")

        logger.debug(f"Loaded reference from {path}")
        return solution

    def store(self, key: str, solution: ReferenceSolution) -> Path:
        """Write atomically (temp file + rename) and return the final path."""
        ensure_directory(self.directory)
        path = self.path_for(key)
        tmp_path = path.with_name(path.name + ".tmp")
        with open(tmp_path, "wb") as f:
            np.savez(
                f,
                n_primal=np.int64(solution.point.n_primal),
                n_dual=np.int64(solution.point.n_dual),
                x=solution.point.x,
                mu=solution.point.mu,
                achieved_dx=np.float64(solution.achieved_dx),
                achieved_dmu=np.float64(solution.achieved_dmu),
                iterations=np.int64(solution.iterations),
                converged=np.bool_(solution.converged),
            )
        os.replace(tmp_path, path)
        logger.info(f"Stored reference solution at {path}")
        return path

    @contextmanager
    def locked(self, key: str) -> Iterator[None]:
        """Hold the advisory lock for ``key``."""
        ensure_directory(self.directory)
        lock_path = self.path_for(key).with_suffix(".lock")
        with open(lock_path, "a+") as handle:
            self._acquire(handle)
            try:
                yield
            finally:
                fcntl.flock(handle.fileno(), fcntl.LOCK_UN)

    def _acquire(self, handle: IO) -> None:
        try:
            for attempt in Retrying(
                retry=retry_if_exception_type(BlockingIOError),
                wait=wait_exponential(multiplier=0.05, max=5.0),
                stop=stop_after_delay(self.lock_timeout),
                reraise=True,
            ):
                with attempt:
                    fcntl.flock(handle.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            raise ReferenceCacheError(
                f"Timed out after {self.lock_timeout:.0f}s waiting for {handle.name}"
            )


def _solve_reference(
    problem: SvmProblem, metric: PdMetric, tol: float, max_iters: int, show_progress: bool
) -> ReferenceSolution:
    z0 = initial_point(problem)
    with tqdm(
        total=max_iters, desc="Reference CP", unit="it", disable=not show_progress, leave=False
    ) as progress:

        def observer(n, point, info) -> bool:
            if n and n % PROGRESS_EVERY == 0:
                progress.update(PROGRESS_EVERY)
            return False

        trace = run_cp(
            problem.pd_problem,
            z0,
            metric,
            StoppingRule(
                max_iters=max_iters, tol=tol, observer=observer if show_progress else None
            ),
        )

    converged = trace.status is RunStatus.CONVERGED
    if not converged:
        logger.warning(
            f"Reference run hit the cap of {max_iters} iterations "
            f"(dx={trace.last_dx:.3e}, dmu={trace.last_dmu:.3e})"
        )
    return ReferenceSolution(
        point=trace.z,
        achieved_dx=trace.last_dx,
        achieved_dmu=trace.last_dmu,
        iterations=trace.iterations,
        converged=converged,
    )


def compute_reference_solution(
    problem: SvmProblem,
    metric: PdMetric,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    cache: Optional[ReferenceCache] = None,
    show_progress: bool = False,
) -> ReferenceSolution:
    """
    Chambolle-Pock reference solution, cached when a cache is given.

    Args:
        problem: Assembled SVM problem
        metric: Step sizes and operator; tau and sigma are part of the cache key
        tol: Bound on ||x_n - x_{n-1}|| and ||mu_n - mu_{n-1}||
        max_iters: Safety cap; the best point is returned when it is reached
        cache: Reference cache, or None to always recompute
        show_progress: Show a tqdm bar during the run

    Returns:
        ReferenceSolution with the achieved tolerances
    """
    if cache is None:
        return _solve_reference(problem, metric, tol, max_iters, show_progress)

    key = ReferenceCache.key(
        problem.dataset.content_hash(), problem.delta, metric.tau, metric.sigma, tol
    )
    with cache.locked(key):
        cached = cache.load(key)
        if cached is not None and (cached.converged or cached.iterations >= max_iters):
            logger.info(f"Reference cache hit for {problem.dataset} (delta={problem.delta})")
            return cached

        logger.info(f"Reference cache miss for {problem.dataset}; running Chambolle-Pock")
        solution = _solve_reference(problem, metric, tol, max_iters, show_progress)
        cache.store(key, solution)
        return solution
