"""Shared fixtures: the eight-sample CI dataset and its reference solution."""

from pathlib import Path

import numpy as np
import pytest

from src.solver.primal_dual import PdMetric
from src.svm_bench.benchmark import BenchInstance
from src.svm_bench.libsvm import load_libsvm
from src.svm_bench.problem import assemble_problem
from src.svm_bench.reference import compute_reference_solution
from src.svm_bench.utils import CACHE_DIR_ENV, DATA_DIR_ENV


FIXTURES_DIR = Path(__file__).parent / "fixtures"
CI_FIXTURE = FIXTURES_DIR / "ci_fixture.libsvm"
CI_DELTA = 0.5
CI_REFERENCE_TOL = 1e-15


@pytest.fixture(scope="session")
def ci_fixture_path() -> Path:
    return CI_FIXTURE


@pytest.fixture(scope="session")
def ci_dataset():
    return load_libsvm(CI_FIXTURE)


@pytest.fixture(scope="session")
def ci_problem(ci_dataset):
    return assemble_problem(ci_dataset, CI_DELTA)


@pytest.fixture(scope="session")
def ci_metric(ci_problem):
    return PdMetric.from_operator(ci_problem.L)


@pytest.fixture(scope="session")
def ci_reference(ci_problem, ci_metric):
    """High-accuracy Chambolle-Pock solution of the CI problem (no disk cache)."""
    return compute_reference_solution(
        ci_problem, ci_metric, tol=CI_REFERENCE_TOL, max_iters=2_000_000
    )


@pytest.fixture(scope="session")
def ci_instance(ci_problem, ci_metric, ci_reference):
    return BenchInstance(problem=ci_problem, metric=ci_metric, reference=ci_reference)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def isolated_dirs(tmp_path, monkeypatch):
    """Point the data and cache directories at a temporary location."""
    data = tmp_path / "data"
    cache = tmp_path / "cache"
    monkeypatch.setenv(DATA_DIR_ENV, str(data))
    monkeypatch.setenv(CACHE_DIR_ENV, str(cache))
    return data, cache
