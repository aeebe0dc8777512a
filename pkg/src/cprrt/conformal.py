"""Conformal calibration of path predictors.

The nonconformity score of a trajectory against a predicted waypoint path
is the largest distance from any trajectory sample to the waypoint whose
Voronoi cell contains it. Waypoint indices are 0-based; points equidistant
from several waypoints belong to the lowest index.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels as K
from .dynamics import Trajectory, densify, trajectory_from_dict, trajectory_to_dict
from .env import PlanningProblem, problem_from_dict, problem_to_dict
from .predictor import PredictedPath, PredictorError, astar_predict

log = logging.getLogger(__name__)

SCORE_SPACING = 0.25


@dataclass(frozen=True)
class CalibrationRecord:
    problem: PlanningProblem
    solution: Trajectory


@dataclass(frozen=True)
class CalibrationModel:
    q_hat: float
    alpha: float
    n_cal: int
    scores: tuple[float, ...]
    predictor_tag: str = "astar"
    distribution_tag: str = ""
    skipped: int = 0
    warnings: tuple[str, ...] = ()

    @property
    def rank(self) -> int:
        return conformal_rank(self.n_cal, self.alpha)


@dataclass(frozen=True)
class PredictionRegions:
    path: PredictedPath
    q_hat: float

    def __post_init__(self):
        if not self.q_hat >= 0:
            raise ValueError("q_hat must be non-negative")


def _positions(trajectory) -> np.ndarray:
    if isinstance(trajectory, Trajectory):
        trajectory = densify(trajectory, SCORE_SPACING).positions
    return np.ascontiguousarray(np.asarray(trajectory, dtype=np.float64)[:, :2])


def voronoi_index(path: PredictedPath, q: Sequence[float]) -> int:
    return int(K.nearest_index(path.points, float(q[0]), float(q[1])))


def ncs(path: PredictedPath, trajectory) -> float:
    """Max over samples of the distance to the sample's Voronoi generator.

    ``trajectory`` is a :class:`Trajectory` (refined to 0.25 m spacing
    first) or an ``(n, >=2)`` array of already discretized samples.
    """
    pts = _positions(trajectory)
    _, dist = K.assign_cells(path.points, pts)
    return float(dist.max())


def conformal_rank(n_cal: int, alpha: float) -> int:
    """1-based rank ``ceil((1 - alpha)(n_cal + 1))`` of the conformal quantile."""
    # round away float noise such as 0.9 * 51 = 45.900000000000006
    return int(math.ceil(round((1.0 - alpha) * (n_cal + 1), 9)))


def conformal_quantile(scores: Iterable[float], alpha: float) -> float:
    """The rank-r smallest score, or +inf when r exceeds the sample count."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    s = sorted(float(v) for v in scores)
    if not s:
        raise ValueError("no calibration scores")
    r = conformal_rank(len(s), alpha)
    return s[r - 1] if r <= len(s) else math.inf


def calibrate(records: Sequence[CalibrationRecord], alpha: float,
              predictor: Callable[[PlanningProblem], PredictedPath] = astar_predict, *,
              predictor_tag: str = "astar", distribution_tag: str = "") -> CalibrationModel:
    """Score every record against the predictor's path and take the conformal quantile.

    Records on which the predictor fails are skipped (and counted); the
    returned model's ``n_cal`` is the number of scored records.
    """
    if not records:
        raise ValueError("calibration needs at least one record")
    notes = []
    scores = []
    skipped = 0
    for i, rec in enumerate(records):
        try:
            path = predictor(rec.problem)
        except PredictorError as exc:
            skipped += 1
            notes.append(f"record {i} skipped: {exc}")
            continue
        scores.append(ncs(path, rec.solution))
    if not scores:
        raise PredictorError("predictor failed on every calibration record")
    scores.sort()
    q_hat = conformal_quantile(scores, alpha)
    if math.isinf(q_hat):
        notes.append(f"rank {conformal_rank(len(scores), alpha)} exceeds n_cal={len(scores)}; "
                     "q_hat is +inf")
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return CalibrationModel(q_hat, alpha, len(scores), tuple(scores), predictor_tag,
                            distribution_tag, skipped, tuple(notes))


def recalibrate(model: CalibrationModel, alpha: float) -> CalibrationModel:
    """Same scores, different miscoverage level."""
    q_hat = conformal_quantile(model.scores, alpha)
    return CalibrationModel(q_hat, alpha, model.n_cal, model.scores, model.predictor_tag,
                            model.distribution_tag, model.skipped, model.warnings)


def in_point_set(regions: PredictionRegions, k: int, q: Sequence[float]) -> bool:
    pts = regions.path.points
    if voronoi_index(regions.path, q) != k:
        return False
    return K.euclid(float(q[0]), float(q[1]), pts[k, 0], pts[k, 1]) <= regions.q_hat


def in_union(regions: PredictionRegions, q: Sequence[float]) -> bool:
    """Membership in the union of all point-wise sets."""
    return any(in_point_set(regions, k, q) for k in range(len(regions.path)))


def trajectory_in_prediction_set(regions: PredictionRegions, trajectory) -> bool:
    """Score route: the trajectory's nonconformity score is within q_hat."""
    return ncs(regions.path, trajectory) <= regions.q_hat


def trajectory_in_point_sets(regions: PredictionRegions, trajectory) -> bool:
    """Decomposed route: every sample lies in some point-wise set."""
    pts = _positions(trajectory)
    idx, _ = K.assign_cells(regions.path.points, pts)
    for p, k in zip(pts, idx):
        if not in_point_set(regions, int(k), p):
            return False
    return True


# --- file formats -----------------------------------------------------------

def _fmt(x: float):
    return "inf" if math.isinf(x) else float(f"{x:.9g}")


def model_to_dict(model: CalibrationModel) -> dict:
    return {
        "q_hat": _fmt(model.q_hat),
        "alpha": model.alpha,
        "n_cal": model.n_cal,
        "scores": [_fmt(s) for s in model.scores],
        "predictor": model.predictor_tag,
        "distribution": model.distribution_tag,
        "skipped": model.skipped,
    }


def model_from_dict(d: dict) -> CalibrationModel:
    q = d["q_hat"]
    q_hat = math.inf if q == "inf" else float(q)
    return CalibrationModel(q_hat, float(d["alpha"]), int(d["n_cal"]),
                            tuple(float(s) for s in d["scores"]), d.get("predictor", "astar"),
                            d.get("distribution", ""), int(d.get("skipped", 0)))


def save_model(model: CalibrationModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path) -> CalibrationModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def record_to_dict(rec: CalibrationRecord) -> dict:
    return {"problem": problem_to_dict(rec.problem), "solution": trajectory_to_dict(rec.solution)}


def record_from_dict(d: dict) -> CalibrationRecord:
    return CalibrationRecord(problem_from_dict(d["problem"]), trajectory_from_dict(d["solution"]))


def write_records(records: Iterable[CalibrationRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec)) + "\n")


def read_records(path) -> list[CalibrationRecord]:
    with open(path, encoding="utf-8") as fh:
        return [record_from_dict(json.loads(line)) for line in fh if line.strip()]
