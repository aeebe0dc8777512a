"""Experiment pipeline and command-line entry point."""
from .experiments import (AGGREGATE_COLUMNS, RESULT_COLUMNS, SWEEP_ALPHAS, SWEEP_P_BIAS,
                          BenchmarkOutput, CalibrationBudgetError, CoverageReport,
                          ExperimentConfig, PlannerSpec, RunResult, RunTask, aggregate,
                          build_calibration, build_id, calibrate_records, coverage_of,
                          derive_seed, eval_coverage, fresh_records, make_tasks, predict,
                          problem_suite, read_header, read_results, read_table, run_benchmark,
                          run_one, sample_problem, summary_row, sweep, verify_solution)

__all__ = [
    "AGGREGATE_COLUMNS", "RESULT_COLUMNS", "SWEEP_ALPHAS", "SWEEP_P_BIAS",
    "BenchmarkOutput", "CalibrationBudgetError", "CoverageReport", "ExperimentConfig",
    "PlannerSpec", "RunResult", "RunTask", "aggregate", "build_calibration", "build_id",
    "calibrate_records", "coverage_of", "derive_seed", "eval_coverage", "fresh_records",
    "make_tasks", "predict", "problem_suite", "read_header", "read_results", "read_table",
    "run_benchmark", "run_one", "sample_problem", "summary_row", "sweep", "verify_solution",
]
