"""
Tests for the benchmark harness: cost model, CSV export, runs, sweeps and the CLI.
"""

import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

import run_benchmark as cli
from src.svm_bench.benchmark import BenchInstance, run_baseline, run_benchmark
from src.svm_bench.cost_model import (
    cp_iteration_cost,
    iteration_cost,
    mean_iteration_cost,
    scaled_iteration_series,
)
from src.svm_bench.export import CSV_COLUMNS, export_csv, read_csv
from src.svm_bench.models import BenchConfig, BenchmarkError, IterationRecord, ReferenceSolution
from src.svm_bench.problem import initial_point
from src.svm_bench.reference import ReferenceCache
from src.svm_bench.sweep import (
    export_sweep,
    memory_sweep_configs,
    mode_configs,
    robustness_configs,
    run_sweep,
    summarize,
)

CI_FIXTURE = Path(__file__).parent / "fixtures" / "ci_fixture.libsvm"


def make_records(count, wall_ns=100, model_cost=1.0):
    return [
        IterationRecord(
            n=n,
            wall_ns=wall_ns,
            m_dist=1.0 / (n + 1),
            m_dist_normalized=1.0 / (n + 1),
            model_cost=model_cost if n > 0 else 0.0,
        )
        for n in range(count + 1)
    ]


def ci_config(**kwargs):
    settings = {"dataset": str(CI_FIXTURE), "tol": 1e-6, "max_iters": 50_000}
    settings.update(kwargs)
    return BenchConfig(**settings)


class TestCostModel:
    """Deterministic flop model."""

    def test_cp_cost(self):
        assert cp_iteration_cost(nnz=10, dim=20) == 160.0
        assert iteration_cost("cp", "recursive", 7, 5, nnz=10, dim=20) == 160.0

    def test_pd_dwifob_recursive_first_iteration(self):
        # k = 1: 2 * 20 + 17 * 20 + (20 + 1)
        assert iteration_cost("pd_dwifob", "recursive", 0, 5, nnz=10, dim=20) == 401.0

    def test_pd_dwifob_direct(self):
        # k = 4: 4 * 20 + 20 * 20 + (80 + 64)
        assert iteration_cost("pd_dwifob", "direct", 3, 5, nnz=10, dim=20) == 624.0

    def test_raa_memory_saturates(self):
        # k = 3: 160 + 7 * 20 + (60 + 27)
        assert iteration_cost("raa", "recursive", 10, 2, nnz=10, dim=20) == 387.0

    def test_recursive_cheaper_than_direct_for_sparse_heavy_operators(self):
        recursive = iteration_cost("pd_dwifob", "recursive", 10, 5, nnz=10_000, dim=100)
        direct = iteration_cost("pd_dwifob", "direct", 10, 5, nnz=10_000, dim=100)
        assert recursive < direct

    def test_unknown_algorithm(self):
        with pytest.raises(BenchmarkError):
            iteration_cost("admm", "recursive", 0, 1, 10, 10)


class TestScaledSeries:
    def test_baseline_against_itself(self):
        records = make_records(100)
        series = scaled_iteration_series(records, "wallclock", make_records(100))
        assert series.ratio == 1.0
        assert records[10].scaled_n == 10.0

    def test_double_cost_doubles_ratio(self):
        series = scaled_iteration_series(
            make_records(100, wall_ns=200), "wallclock", make_records(100, wall_ns=100)
        )
        assert series.ratio == pytest.approx(2.0)
        assert series.values[5] == pytest.approx(10.0)

    def test_deterministic_uses_model_cost(self):
        series = scaled_iteration_series(
            make_records(10, model_cost=3.0), "deterministic", make_records(10, model_cost=2.0)
        )
        assert series.ratio == pytest.approx(1.5)

    def test_warmup_iterations_are_excluded(self):
        records = make_records(200)
        for record in records[1:51]:
            record.wall_ns = 10**9
        assert mean_iteration_cost(records, "wallclock", warmup=50) == 100.0

    def test_short_runs_keep_warmup(self):
        records = make_records(10, wall_ns=40)
        assert mean_iteration_cost(records, "wallclock", warmup=50) == 40.0

    def test_missing_baseline(self):
        with pytest.raises(BenchmarkError):
            scaled_iteration_series(make_records(5), "wallclock", [])

    def test_unknown_cost_model(self):
        with pytest.raises(BenchmarkError):
            mean_iteration_cost(make_records(5), "flops")


class TestExport:
    def test_empty_export_has_header_only(self, tmp_path):
        path = export_csv([], tmp_path / "empty.csv")
        assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"

    def test_one_line_per_record(self, tmp_path):
        path = export_csv(make_records(2), tmp_path / "nested" / "trace.csv")
        assert len(path.read_text().splitlines()) == 4

    def test_round_trip_keeps_full_precision(self, tmp_path):
        record = IterationRecord(
            n=3,
            wall_ns=12345,
            m_dist=0.1 + 0.2,
            m_dist_normalized=1.0 / 3.0,
            scaled_n=3.0 * 1.2345678901234567,
            V_n=None,
            slack=2.5e-300,
            flags="degenerate",
        )
        path = export_csv([record], tmp_path / "trace.csv")
        (row,) = read_csv(path)

        assert row["n"] == 3
        assert row["wall_ns"] == 12345
        assert row["m_dist"] == 0.1 + 0.2
        assert row["m_dist_normalized"] == 1.0 / 3.0
        assert row["scaled_n"] == 3.0 * 1.2345678901234567
        assert row["V_n"] is None
        assert row["slack"] == 2.5e-300
        assert row["flags"] == "degenerate"

    def test_missing_values_are_empty_cells(self, tmp_path):
        path = export_csv(make_records(1), tmp_path / "trace.csv")
        first_row = path.read_text().splitlines()[1]
        assert first_row.endswith(",,,,")


class TestRunBenchmark:
    """End-to-end runs on the eight-sample fixture."""

    def test_cp_converges_with_unit_ratio(self, ci_instance):
        result = run_benchmark(ci_config(algorithm="cp", m=0), instance=ci_instance)
        summary = result.summary

        assert result.records[0].m_dist_normalized == 1.0
        assert result.records[0].n == 0
        assert summary.status == "converged"
        assert summary.exit_code == 0
        assert summary.cost_ratio == 1.0
        assert summary.iterations_to_tol == summary.iterations
        assert result.records[-1].m_dist_normalized <= 1e-6
        assert summary.scaled_iterations_to_tol == summary.iterations_to_tol

    def test_pd_dwifob_records_lyapunov(self, ci_instance):
        config = ci_config(algorithm="pd_dwifob", m=3, record_lyapunov=True, objective_every=10)
        result = run_benchmark(config, instance=ci_instance)

        assert result.summary.status == "converged"
        assert all(r.V_n is not None for r in result.records[1:])
        assert result.records[0].V_n is None
        assert result.records[10].objective is not None
        assert result.records[11].objective is None
        assert result.summary.cost_ratio > 1.0
        assert result.summary.final_objective < 8.0
        assert "degenerate_weights" in result.summary.metadata

    def test_direct_mode_costs_more_per_iteration(self, ci_instance):
        recursive = run_benchmark(ci_config(m=2, max_iters=20), instance=ci_instance)
        direct = run_benchmark(ci_config(m=2, max_iters=20, mode="direct"), instance=ci_instance)
        assert direct.summary.cost_ratio > recursive.summary.cost_ratio

    def test_raa_from_origin_reaches_reference(self, ci_instance):
        result = run_benchmark(ci_config(algorithm="raa", m=5, xi=1e-5), instance=ci_instance)
        summary = result.summary
        assert summary.status == "converged"
        assert summary.exit_code == 0
        assert summary.final_m_dist_normalized <= 1e-6
        assert np.isfinite(summary.metadata["divergence_threshold"])

    def test_raa_divergence_is_reported(self, ci_instance):
        config = ci_config(algorithm="raa", m=5, init_scale=1e6, divergence_factor=1e-3)
        result = run_benchmark(config, instance=ci_instance)
        summary = result.summary

        assert summary.status == "diverged"
        assert summary.exit_code == 3
        assert summary.iterations_to_tol is None
        # ||r_0|| is of order 1e6, so the threshold sits near 1e3
        threshold = summary.metadata["divergence_threshold"]
        assert 1.0 < threshold < 1e6

    def test_divergence_factor_must_be_positive(self):
        with pytest.raises(ValueError):
            ci_config(algorithm="raa", divergence_factor=0.0)

    def test_iteration_cap(self, ci_instance):
        result = run_benchmark(
            ci_config(algorithm="cp", m=0, max_iters=3, tol=1e-12), instance=ci_instance
        )
        assert result.summary.status == "max_iters"
        assert result.summary.exit_code == 2
        assert [r.n for r in result.records] == [0, 1, 2, 3]

    def test_wallclock_ratio_from_baseline(self, ci_instance):
        config = ci_config(m=2, max_iters=100, cost_model="wallclock", warmup=5, baseline_iters=20)
        baseline = run_baseline(ci_instance, config)
        assert len(baseline) == 26

        result = run_benchmark(config, instance=ci_instance, baseline_records=baseline)
        assert result.summary.cost_ratio > 0
        assert result.records[4].scaled_n == pytest.approx(4 * result.summary.cost_ratio)

    def test_zeta_of_one_is_rejected(self, ci_instance):
        with pytest.raises(BenchmarkError):
            run_benchmark(ci_config(zeta=1.0), instance=ci_instance)

    def test_start_at_reference_is_rejected(self, ci_instance):
        at_origin = BenchInstance(
            problem=ci_instance.problem,
            metric=ci_instance.metric,
            reference=ReferenceSolution(
                point=initial_point(ci_instance.problem),
                achieved_dx=0.0,
                achieved_dmu=0.0,
                iterations=0,
                converged=True,
            ),
        )
        with pytest.raises(BenchmarkError):
            run_benchmark(ci_config(algorithm="cp", m=0), instance=at_origin)


class TestBenchConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"algorithm": "admm"},
            {"step_rule": "fixed"},
            {"mode": "lazy"},
            {"cost_model": "flops"},
            {"delta": 0.0},
            {"algorithm": "pd_dwifob", "m": 0},
            {"xi": -1e-5},
            {"tol": 0.0},
            {"max_iters": 0},
            {"init_scale": -1.0},
        ],
    )
    def test_invalid_values(self, kwargs):
        with pytest.raises(ValueError):
            BenchConfig(dataset="x", **kwargs)

    def test_cp_accepts_zero_memory(self):
        assert BenchConfig(dataset="x", algorithm="cp", m=0).label == "cp"

    def test_from_file_with_overrides(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"dataset": "breast-cancer", "m": 3, "xi": 1e-3}))
        config = BenchConfig.from_file(path, m=7, xi=None)
        assert config.m == 7
        assert config.xi == 1e-3
        assert config.dataset == "breast-cancer"

    def test_from_file_rejects_unknown_keys(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"dataset": "x", "memory": 3}))
        with pytest.raises(ValueError):
            BenchConfig.from_file(path)

    def test_schedule_margin_never_exceeds_step(self):
        config = BenchConfig(dataset="x")
        assert config.schedule(0.001).epsilon == 0.001
        assert config.schedule(1.0).epsilon == 0.01

    def test_labels(self):
        assert BenchConfig(dataset="x", algorithm="raa", m=5, xi=0.0).label == "raa m=5 xi=0"
        assert BenchConfig(dataset="x", mode="direct").label == "pd_dwifob m=5 xi=1e-05 direct"


class TestSweeps:
    def test_config_counts(self):
        base = BenchConfig(dataset="x")
        memory = memory_sweep_configs(base)
        assert [c.algorithm for c in memory] == ["cp"] + ["pd_dwifob"] * 5
        assert len(robustness_configs(base)) == 2 * 3 * 3 * 3
        assert {(c.m, c.mode) for c in mode_configs(base, memories=(1, 5))} == {
            (1, "recursive"),
            (1, "direct"),
            (5, "recursive"),
            (5, "direct"),
        }

    def test_run_and_export(self, tmp_path):
        base = ci_config(reference_tol=1e-12, max_iters=5000)
        configs = memory_sweep_configs(base, memories=(0, 2)) + [
            BenchConfig(**{**base.to_dict(), "algorithm": "raa", "m": 2})
        ]
        results = run_sweep(configs, cache=ReferenceCache(tmp_path / "cache"), show_progress=False)

        assert [r.config.algorithm for r in results] == ["cp", "pd_dwifob", "raa"]
        table = summarize(results)
        assert list(table["algorithm"]) == ["cp", "pd_dwifob", "raa"]

        summary_path = export_sweep(results, tmp_path / "out")
        assert len(pd.read_csv(summary_path)) == 3
        traces = sorted(p.name for p in (tmp_path / "out").glob("ci_fixture_*.csv"))
        assert traces == [
            "ci_fixture_cp.csv",
            "ci_fixture_pd_dwifob_m2_xi1e-05_recursive_s0.csv",
            "ci_fixture_raa_m2_xi1e-05_recursive_s0.csv",
        ]


class TestCli:
    def test_build_config_from_flags(self):
        args = cli.create_argument_parser().parse_args(
            ["breast-cancer", "--memory", "3", "--lambda", "0.9", "--mode", "direct"]
        )
        config = cli.build_config(args)
        assert (config.dataset, config.m, config.lam, config.mode) == (
            "breast-cancer",
            3,
            0.9,
            "direct",
        )
        assert config.record_lyapunov is False

    def test_build_config_requires_dataset(self):
        args = cli.create_argument_parser().parse_args(["--xi", "0.1"])
        with pytest.raises(ValueError):
            cli.build_config(args)

    def test_main_writes_trace_and_summary(self, tmp_path, monkeypatch):
        config_path = tmp_path / "run.json"
        config_path.write_text(
            json.dumps({"dataset": str(CI_FIXTURE), "algorithm": "cp", "reference_tol": 1e-12})
        )
        out = tmp_path / "trace.csv"
        summary_json = tmp_path / "summary.json"
        monkeypatch.setattr(
            sys,
            "argv",
            [
                "run_benchmark.py",
                "--config",
                str(config_path),
                "--tol",
                "1e-4",
                "--no-cache",
                "--out",
                str(out),
                "--summary-json",
                str(summary_json),
            ],
        )

        assert cli.main() == 0
        assert read_csv(out)[0]["m_dist_normalized"] == 1.0
        payload = json.loads(summary_json.read_text())
        assert payload["summary"]["status"] == "converged"
        assert payload["config"]["tol"] == 1e-4

    def test_main_reports_errors(self, tmp_path, monkeypatch):
        monkeypatch.setattr(sys, "argv", ["run_benchmark.py", str(tmp_path / "missing")])
        assert cli.main() == 1
