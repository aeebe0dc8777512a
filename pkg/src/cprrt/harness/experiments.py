"""Experiment pipeline: problem suites, calibration data, benchmarks, sweeps, coverage."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import statistics
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from .. import __version__
from ..conformal import (CalibrationModel, CalibrationRecord, PredictionRegions, calibrate,
                         ncs, recalibrate, write_records)
from ..dynamics import ModelParams, Trajectory
from ..env import (MAZE_CELLS, PlanningProblem, WorldGenerationError, generate_density_world,
                   generate_maze_world, in_goal)
from ..planner import PlannerConfig, SamplerConfig, plan, rrt_star_gamma, trajectory_free
from ..predictor import PredictedPath, astar_predict, load_external_path

log = logging.getLogger(__name__)

RESULT_COLUMNS = ("planner", "problem_id", "seed", "success", "time_s", "iters_to_first",
                  "first_cost", "nodes", "fallbacks")
SWEEP_ALPHAS = (0.02, 0.1, 0.2, 0.3, 0.4)
SWEEP_P_BIAS = (0.25, 0.5, 0.75)

# seed-sequence purpose tags keep calibration, test and coverage problems disjoint
_CAL, _TEST, _COVER, _RUN = 0, 1, 2, 3


class CalibrationBudgetError(RuntimeError):
    """Too many sampled problems went unsolved within the iteration budget."""


def fmt_float(x: Optional[float]) -> str:
    if x is None:
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


def build_id() -> str:
    """``git describe``-style identifier of the running code."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"cprrt-{__version__}-{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"cprrt-{__version__}"


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint32)[0])


# --- configuration and results ----------------------------------------------

@dataclass(frozen=True)
class PlannerSpec:
    """One benchmark entry. ``alpha``/``p_bias`` of None inherit the experiment's."""
    kind: str
    alpha: Optional[float] = None
    p_bias: Optional[float] = None
    label: Optional[str] = None

    @property
    def tag(self) -> str:
        if self.label:
            return self.label
        if self.kind != "cp" or (self.alpha is None and self.p_bias is None):
            return self.kind
        return f"cp[alpha={self.alpha},p_bias={self.p_bias}]"


DEFAULT_PLANNERS = (PlannerSpec("uniform"), PlannerSpec("goal_biased"), PlannerSpec("cp"))


@dataclass(frozen=True)
class ExperimentConfig:
    """Protocol of one benchmark.

    ``suite`` is ``"density"`` (worlds drawn per density) or ``"maze"``
    (``n_worlds`` mazes; cp entries use the density-10 calibration).
    """
    model: str = "holonomic"
    densities: tuple[int, ...] = (30,)
    n_worlds: int = 20
    repeats: int = 10
    planners: tuple[PlannerSpec, ...] = DEFAULT_PLANNERS
    alpha: float = 0.1
    p_bias: float = 0.5
    n_iters: int = 20_000
    seed: int = 0
    out_dir: Optional[str] = None
    suite: str = "density"
    maze_cells: int = MAZE_CELLS
    predictor: str = "astar"
    serial: bool = True
    workers: Optional[int] = None

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.n_worlds < 1:
            raise ValueError("n_worlds must be >= 1")
        if self.suite not in ("density", "maze"):
            raise ValueError(f"unknown suite {self.suite!r}")
        if self.suite == "density" and any(d not in (10, 20, 30, 40, 50) for d in self.densities):
            raise ValueError("densities must be drawn from {10, 20, 30, 40, 50}")
        ModelParams(self.model)

    @classmethod
    def full_scale(cls, **kw) -> "ExperimentConfig":
        """The published protocol: 30 repeats over 50 problems."""
        kw.setdefault("n_worlds", 50)
        kw.setdefault("repeats", 30)
        return cls(**kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["planners"] = [asdict(p) | {"tag": p.tag} for p in self.planners]
        d["densities"] = list(self.densities)
        return d


@dataclass
class RunResult:
    planner: str
    problem_id: str
    seed: int
    success: bool
    time_s: Optional[float]
    iters_to_first: Optional[int]
    first_cost: Optional[float]
    nodes: int
    fallbacks: int

    def __post_init__(self):
        if self.success != (self.time_s is not None):
            raise ValueError("success must coincide with a recorded time")

    def to_row(self) -> dict:
        return {
            "planner": self.planner,
            "problem_id": self.problem_id,
            "seed": str(self.seed),
            "success": "1" if self.success else "0",
            "time_s": fmt_float(self.time_s),
            "iters_to_first": "" if self.iters_to_first is None else str(self.iters_to_first),
            "first_cost": fmt_float(self.first_cost),
            "nodes": str(self.nodes),
            "fallbacks": str(self.fallbacks),
        }

    @classmethod
    def from_row(cls, row: Mapping[str, str]) -> "RunResult":
        def opt(v, cast):
            return None if v in ("", None) else cast(v)
        return cls(row["planner"], row["problem_id"], int(row["seed"]), row["success"] == "1",
                   opt(row["time_s"], float), opt(row["iters_to_first"], int),
                   opt(row["first_cost"], float), int(row["nodes"]), int(row["fallbacks"]))


# --- problem suites -----------------------------------------------------------

def sample_problem(density: int, seed: int, purpose: int, index: int) -> PlanningProblem:
    """Deterministic draw number ``index`` from the density distribution."""
    return generate_density_world(density, derive_seed(seed, purpose, density, index))


def problem_suite(cfg: ExperimentConfig) -> list[tuple[str, int, PlanningProblem]]:
    """``(problem_id, density, problem)`` triples; density is 10 for mazes."""
    out = []
    if cfg.suite == "maze":
        for i in range(cfg.n_worlds):
            out.append((f"maze-{i:03d}", 10,
                        generate_maze_world(derive_seed(cfg.seed, _TEST, 0, i), cells=cfg.maze_cells)))
        return out
    for d in cfg.densities:
        for i in range(cfg.n_worlds):
            out.append((f"d{d}-{i:03d}", d, sample_problem(d, cfg.seed, _TEST, i)))
    return out


# --- calibration data ---------------------------------------------------------

def verify_solution(problem: PlanningProblem, traj: Trajectory, resolution: float = 0.25) -> bool:
    """Starts at the start, ends in the goal disc, collision free throughout."""
    start_ok = np.allclose(traj.start[:2], problem.start, atol=1e-9)
    return bool(start_ok and in_goal(problem, traj.end) and
                trajectory_free(problem.world, traj, resolution))


def solve_long(problem: PlanningProblem, model: ModelParams, iters: int,
               seed: int) -> Optional[Trajectory]:
    """Approximately optimal solution: uniform RRT* run for the full budget."""
    res = plan(problem, model, SamplerConfig("uniform"), PlannerConfig(n_iters=iters, seed=seed))
    return res.best


def _solved_problems(density: int, n: int, iters: int, seed: int, purpose: int,
                     model: ModelParams) -> tuple[list[CalibrationRecord], int]:
    records: list[CalibrationRecord] = []
    resampled = 0
    draw = 0
    while len(records) < n:
        if resampled > 3 * n:
            raise CalibrationBudgetError(
                f"{resampled} problems at density {density} went unsolved in {iters} iterations")
        idx = draw
        draw += 1
        try:
            problem = sample_problem(density, seed, purpose, idx)
        except WorldGenerationError:
            resampled += 1
            continue
        sol = solve_long(problem, model, iters, derive_seed(seed, _RUN, purpose, density, idx))
        if sol is None or not verify_solution(problem, sol):
            resampled += 1
            log.info("problem %d at density %d unsolved, resampling", idx, density)
            continue
        records.append(CalibrationRecord(problem, sol))
    return records, resampled


def build_calibration(density: int, n_cal: int = 50, iters: int = 20_000, seed: int = 0,
                      model: str = "holonomic", out: Optional[str | Path] = None
                      ) -> list[CalibrationRecord]:
    """Sample ``n_cal`` problems and solve each with a long uniform RRT* run.

    Unsolved problems are replaced by fresh draws; more than ``3 * n_cal``
    replacements raises :class:`CalibrationBudgetError`. When ``out`` is
    given the records are written there as JSON lines.
    """
    if n_cal < 1:
        raise ValueError("n_cal must be >= 1")
    records, resampled = _solved_problems(density, n_cal, iters, seed, _CAL, ModelParams(model))
    if resampled:
        log.info("density %d: %d problems resampled", density, resampled)
    if out is not None:
        write_records(records, out)
    return records


# --- planner runs ---------------------------------------------------------------

def predict(problem: PlanningProblem, predictor: str, problem_id: str = "") -> PredictedPath:
    """``astar`` or ``file:<path>``; a directory path is searched for ``<problem_id>.json``."""
    if predictor == "astar":
        return astar_predict(problem)
    if predictor.startswith("file:"):
        p = Path(predictor[5:])
        if p.is_dir():
            p = p / f"{problem_id}.json"
        return load_external_path(p, problem)
    raise ValueError(f"unknown predictor {predictor!r}")


@dataclass(frozen=True)
class RunTask:
    planner: PlannerSpec
    problem_id: str
    problem: PlanningProblem
    seed: int
    model: str
    n_iters: int
    p_bias: float
    q_hat: Optional[float]
    predictor: str = "astar"


def run_one(task: RunTask) -> RunResult:
    """One stop-at-first run. For cp the clock also covers prediction and set construction
    (external path files are loaded before the clock starts)."""
    model = ModelParams(task.model)
    # gamma is a per-world constant, so it is settled before any clock starts
    gamma = rrt_star_gamma(task.problem.world, model)
    pc = PlannerConfig(n_iters=task.n_iters, seed=task.seed, stop_at_first=True, gamma=gamma)
    regions = None
    external = None
    if task.planner.kind == "cp" and task.predictor != "astar":
        external = predict(task.problem, task.predictor, task.problem_id)
    t0 = time.perf_counter()
    if task.planner.kind == "cp":
        path = external if external is not None else predict(task.problem, task.predictor)
        regions = PredictionRegions(path, task.q_hat)
        cfg = SamplerConfig("cp", p_bias=task.p_bias)
    else:
        cfg = SamplerConfig(task.planner.kind)
    setup = time.perf_counter() - t0
    res = plan(task.problem, model, cfg, pc, regions)
    s = res.stats
    ok = s.iters_to_first is not None
    return RunResult(task.planner.tag, task.problem_id, task.seed, ok,
                     setup + s.time_to_first if ok else None, s.iters_to_first,
                     s.first_cost, s.nodes, s.fallbacks)


def _q_hat_for(spec: PlannerSpec, cfg: ExperimentConfig, density: int,
               calibrations: Mapping[int, CalibrationModel]) -> Optional[float]:
    if spec.kind != "cp":
        return None
    if density not in calibrations:
        raise KeyError(f"no calibration model for density {density}")
    cal = calibrations[density]
    alpha = cfg.alpha if spec.alpha is None else spec.alpha
    if not math.isclose(alpha, cal.alpha):
        cal = recalibrate(cal, alpha)
    return cal.q_hat


def make_tasks(cfg: ExperimentConfig,
               calibrations: Mapping[int, CalibrationModel] = {}) -> list[RunTask]:
    tasks = []
    for pid, density, problem in problem_suite(cfg):
        for r in range(cfg.repeats):
            # common random numbers: every planner sees the same seed on a given repeat
            seed = derive_seed(cfg.seed, _RUN, density, int(pid.split("-")[1]), r,
                               1 if cfg.suite == "maze" else 0)
            for spec in cfg.planners:
                p_bias = cfg.p_bias if spec.p_bias is None else spec.p_bias
                tasks.append(RunTask(spec, pid, problem, seed, cfg.model, cfg.n_iters, p_bias,
                                     _q_hat_for(spec, cfg, density, calibrations), cfg.predictor))
    return tasks


def execute(tasks: Sequence[RunTask], serial: bool = True,
            workers: Optional[int] = None) -> Iterator[RunResult]:
    """Yield results in task order. Parallel runs go through a process pool."""
    if serial or len(tasks) < 2:
        for t in tasks:
            yield run_one(t)
        return
    n = workers or os.cpu_count() or 1
    with ProcessPoolExecutor(max_workers=n) as pool:
        yield from pool.map(run_one, tasks, chunksize=1)


# --- aggregation and files --------------------------------------------------------

def _stats(values: Sequence[float]) -> tuple[Optional[float], Optional[float], Optional[float]]:
    if not values:
        return None, None, None
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return statistics.fmean(values), statistics.median(values), std


def aggregate(results: Iterable[RunResult], baseline: str = "uniform") -> list[dict]:
    """Per-planner summary. Time statistics are over successful runs only."""
    groups: dict[str, list[RunResult]] = {}
    for r in results:
        groups.setdefault(r.planner, []).append(r)
    rows = []
    for tag, rs in groups.items():
        times = [r.time_s for r in rs if r.success]
        iters = [float(r.iters_to_first) for r in rs if r.success]
        costs = [r.first_cost for r in rs if r.success]
        mean_t, med_t, std_t = _stats(times)
        mean_i, med_i, _ = _stats(iters)
        rows.append({
            "planner": tag, "runs": len(rs), "success_rate": sum(r.success for r in rs) / len(rs),
            "mean_time_s": mean_t, "median_time_s": med_t, "std_time_s": std_t,
            "mean_iters": mean_i, "median_iters": med_i,
            "mean_first_cost": statistics.fmean(costs) if costs else None,
        })
    base = next((r for r in rows if r["planner"] == baseline), None)
    for row in rows:
        for key, out in (("mean_time_s", "improvement_mean_pct"),
                         ("median_time_s", "improvement_median_pct")):
            if base is None or base[key] in (None, 0.0) or row[key] is None:
                row[out] = None
            else:
                row[out] = 100.0 * (base[key] - row[key]) / base[key]
    return rows


AGGREGATE_COLUMNS = ("planner", "runs", "success_rate", "mean_time_s", "median_time_s",
                     "std_time_s", "mean_iters", "median_iters", "mean_first_cost",
                     "improvement_mean_pct", "improvement_median_pct")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return fmt_float(v)
    return str(v)


def _header_lines(config: dict) -> list[str]:
    return [f"# build: {build_id()}", f"# config: {json.dumps(config, sort_keys=True)}"]


def write_aggregate(rows: Sequence[dict], path: str | Path, config: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(_header_lines(config)) + "\n")
        w = csv.writer(fh)
        w.writerow(AGGREGATE_COLUMNS)
        for row in rows:
            w.writerow([_cell(row[c]) for c in AGGREGATE_COLUMNS])


def _data_lines(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line for line in fh if not line.startswith("#")]


def read_results(path: str | Path) -> list[RunResult]:
    return [RunResult.from_row(row) for row in csv.DictReader(_data_lines(path))]


def read_table(path: str | Path) -> list[dict[str, str]]:
    return list(csv.DictReader(_data_lines(path)))


def read_header(path: str | Path) -> dict:
    """The ``build`` and ``config`` comment lines of a result file."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, val = line[1:].strip().partition(": ")
            out[key] = json.loads(val) if key == "config" else val
    return out


@dataclass
class BenchmarkOutput:
    results: list[RunResult]
    summary: list[dict]
    results_path: Optional[Path] = None
    aggregate_path: Optional[Path] = None


def run_benchmark(cfg: ExperimentConfig, calibrations: Mapping[int, CalibrationModel] = {},
                  tasks: Optional[Sequence[RunTask]] = None, name: str = "results"
                  ) -> BenchmarkOutput:
    """Run every (planner, problem, repeat) and summarize.

    With ``cfg.out_dir`` set, rows are streamed to ``<name>.csv`` as they
    finish (so an interrupted run leaves its completed rows behind) and the
    summary goes to ``<name>_aggregate.csv``.
    """
    tasks = make_tasks(cfg, calibrations) if tasks is None else tasks
    results: list[RunResult] = []
    config = cfg.to_dict()
    if cfg.out_dir is None:
        results.extend(execute(tasks, cfg.serial, cfg.workers))
        return BenchmarkOutput(results, aggregate(results))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rpath, apath = out / f"{name}.csv", out / f"{name}_aggregate.csv"
    with open(rpath, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(_header_lines(config)) + "\n")
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        w.writeheader()
        try:
            for r in execute(tasks, cfg.serial, cfg.workers):
                results.append(r)
                w.writerow(r.to_row())
                fh.flush()
        finally:
            summary = aggregate(results)
            write_aggregate(summary, apath, config)
    return BenchmarkOutput(results, summary, rpath, apath)


def summary_row(summary: Sequence[dict], planner: str) -> dict:
    for row in summary:
        if row["planner"] == planner:
            return row
    raise KeyError(planner)


# --- parameter sweep ------------------------------------------------------------

def sweep(cfg: ExperimentConfig, calibrations: Mapping[int, CalibrationModel],
          alphas: Sequence[float] = SWEEP_ALPHAS, p_biases: Sequence[float] = SWEEP_P_BIAS
          ) -> tuple[BenchmarkOutput, list[dict]]:
    """Benchmark uniform RRT* and CP-RRT* on every (alpha, p_bias) cell.

    Returns the benchmark output and the improvement matrix, one row per
    alpha with the mean-time improvement over uniform for each p_bias.
    """
    planners = [PlannerSpec("uniform")] + [PlannerSpec("cp", a, p) for a in alphas for p in p_biases]
    run_cfg = replace(cfg, planners=tuple(planners))
    bench = run_benchmark(run_cfg, calibrations, name="sweep")
    by_tag = {row["planner"]: row for row in bench.summary}
    matrix = []
    for a in alphas:
        row = {"alpha": a}
        for p in p_biases:
            row[f"p_bias={p}"] = by_tag[PlannerSpec("cp", a, p).tag]["improvement_mean_pct"]
        matrix.append(row)
    if cfg.out_dir is not None:
        cols = ["alpha"] + [f"p_bias={p}" for p in p_biases]
        with open(Path(cfg.out_dir) / "sweep_matrix.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(_header_lines(run_cfg.to_dict())) + "\n")
            w = csv.writer(fh)
            w.writerow(cols)
            for row in matrix:
                w.writerow([_cell(row[c]) for c in cols])
    return bench, matrix


# --- coverage --------------------------------------------------------------------

@dataclass
class CoverageReport:
    coverage: float
    q_hat: float
    alpha: float
    scores: list[float]
    resampled: int
    histogram: tuple[list[int], list[float]] = field(default_factory=lambda: ([], []))

    @property
    def n_test(self) -> int:
        return len(self.scores)

    def to_dict(self) -> dict:
        return {"coverage": self.coverage, "q_hat": fmt_float(self.q_hat), "alpha": self.alpha,
                "n_test": self.n_test, "resampled": self.resampled,
                "scores": [fmt_float(s) for s in self.scores],
                "histogram": {"counts": self.histogram[0],
                              "edges": [fmt_float(e) for e in self.histogram[1]]}}


def coverage_of(records: Sequence[CalibrationRecord], calib: CalibrationModel,
                predictor: str = "astar", resampled: int = 0, bins: int = 20) -> CoverageReport:
    """Fraction of test records whose score is within ``calib.q_hat``."""
    scores = [ncs(predict(r.problem, predictor), r.solution) for r in records]
    covered = sum(s <= calib.q_hat for s in scores)
    counts, edges = np.histogram(scores, bins=bins)
    return CoverageReport(covered / len(scores), calib.q_hat, calib.alpha, scores, resampled,
                          (counts.tolist(), edges.tolist()))


def fresh_records(density: int, n_test: int, iters: int = 20_000, seed: int = 0,
                 model: str = "holonomic") -> tuple[list[CalibrationRecord], int]:
    """Fresh solved problems, disjoint from the calibration draws of the same seed."""
    return _solved_problems(density, n_test, iters, seed, _COVER, ModelParams(model))


def eval_coverage(density: int, calib: CalibrationModel, n_test: int = 200,
                  iters: int = 20_000, seed: int = 0, model: str = "holonomic",
                  predictor: str = "astar") -> CoverageReport:
    records, resampled = fresh_records(density, n_test, iters, seed, model)
    return coverage_of(records, calib, predictor, resampled)


def calibrate_records(records: Sequence[CalibrationRecord], alpha: float, density: int,
                      predictor: str = "astar") -> CalibrationModel:
    return calibrate(records, alpha, lambda p: predict(p, predictor),
                     predictor_tag=predictor, distribution_tag=f"D{density}")
