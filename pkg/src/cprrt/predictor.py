"""Initial-path predictors: 8-connected grid A* and externally produced paths."""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .env import PlanningProblem, lattice_free

SQRT2 = math.sqrt(2.0)
_MOVES = np.array([[1, 0], [-1, 0], [0, 1], [0, -1],
                   [1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=np.int64)


class PredictorError(RuntimeError):
    pass


class NoGridPath(PredictorError):
    """The goal is unreachable on the 1 m lattice."""


class ParseError(PredictorError):
    pass


class EmptyPath(PredictorError):
    pass


@dataclass(frozen=True)
class PredictedPath:
    points: np.ndarray
    source: str = "astar"

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64).reshape(-1, 2)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @property
    def length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.points, axis=0).T)))


@njit(cache=True)
def _astar(free, start_i, start_j, goal_mask, goal_x, goal_y, use_disc, goal_r, moves):
    nx, ny = free.shape
    g = np.full(nx * ny, np.inf)
    parent = np.full(nx * ny, -1, dtype=np.int64)
    closed = np.zeros(nx * ny, dtype=np.bool_)
    s = start_i * ny + start_j
    g[s] = 0.0
    h0 = math.sqrt((start_i - goal_x) ** 2 + (start_j - goal_y) ** 2)
    if use_disc:
        h0 = max(0.0, h0 - goal_r)
    heap = [(h0, h0, s)]
    while len(heap) > 0:
        f, h, c = heapq.heappop(heap)
        if closed[c]:
            continue
        closed[c] = True
        ci = c // ny
        cj = c % ny
        if goal_mask[ci, cj]:
            return c, parent
        for m in range(8):
            ni = ci + moves[m, 0]
            nj = cj + moves[m, 1]
            if ni < 0 or nj < 0 or ni >= nx or nj >= ny or not free[ni, nj]:
                continue
            nc = ni * ny + nj
            if closed[nc]:
                continue
            step = 1.0 if m < 4 else math.sqrt(2.0)
            ng = g[c] + step
            if ng < g[nc]:
                g[nc] = ng
                parent[nc] = c
                nh = math.sqrt((ni - goal_x) ** 2 + (nj - goal_y) ** 2)
                if use_disc:
                    nh = max(0.0, nh - goal_r)
                heapq.heappush(heap, (ng + nh, nh, nc))
    return -1, parent


def goal_lattice(problem: PlanningProblem, free: np.ndarray):
    """Goal target on the lattice: the node at the goal center when it is free,
    otherwise every free node inside the goal disc."""
    x0, y0 = problem.world.bounds[:2]
    gx, gy = problem.goal_center[0] - x0, problem.goal_center[1] - y0
    mask = np.zeros_like(free)
    gi, gj = int(round(gx)), int(round(gy))
    centered = (0 <= gi < free.shape[0] and 0 <= gj < free.shape[1] and free[gi, gj]
                and math.hypot(gi - gx, gj - gy) <= problem.goal_radius)
    if centered:
        mask[gi, gj] = True
        return mask, float(gi), float(gj), False
    ii, jj = np.meshgrid(np.arange(free.shape[0]), np.arange(free.shape[1]), indexing="ij")
    mask = free & (np.hypot(ii - gx, jj - gy) <= problem.goal_radius)
    return mask, gx, gy, True


def lattice_cost(points: np.ndarray) -> float:
    """Octile cost of a lattice path, summed as ``n_straight + sqrt(2) n_diagonal``."""
    steps = np.abs(np.diff(np.rint(points), axis=0)).sum(axis=1)
    n_diag = int(np.sum(steps == 2))
    return float(len(steps) - n_diag) + SQRT2 * n_diag


def astar_predict(problem: PlanningProblem) -> PredictedPath:
    """Grid-optimal 8-connected path on the 1 m lattice of the world.

    A lattice node is usable iff its point is free. Heap entries are ordered by
    ``(f, h, cell index)`` so expansion order, and therefore the returned path,
    is deterministic.
    """
    free = lattice_free(problem.world, 1.0)
    x0, y0 = problem.world.bounds[:2]
    si, sj = int(round(problem.start[0] - x0)), int(round(problem.start[1] - y0))
    if not free[si, sj]:
        raise NoGridPath("start lattice node is occupied")
    mask, gx, gy, use_disc = goal_lattice(problem, free)
    if not mask.any():
        raise NoGridPath("no free lattice node inside the goal region")
    end, parent = _astar(free, si, sj, mask, gx, gy, use_disc, problem.goal_radius, _MOVES)
    if end < 0:
        raise NoGridPath("goal unreachable on the lattice")
    ny = free.shape[1]
    cells = []
    c = end
    while c >= 0:
        cells.append((c // ny, c % ny))
        c = parent[c]
    cells.reverse()
    pts = np.array(cells, dtype=np.float64) + np.array([x0, y0])
    pts[0] = problem.start
    if len(pts) == 1:
        pts = np.vstack([pts, pts])
    return PredictedPath(pts, "astar")


def normalize_path(points, problem: PlanningProblem, source: str = "external") -> PredictedPath:
    """Clamp to bounds, then force the start/goal endpoint conventions."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    bx0, by0, bx1, by1 = problem.world.bounds
    pts = np.column_stack([np.clip(pts[:, 0], bx0, bx1), np.clip(pts[:, 1], by0, by1)])
    start = np.asarray(problem.start)
    if len(pts) == 0 or np.hypot(*(pts[0] - start)) > 0.5:
        pts = np.vstack([start, pts])
    gc = np.asarray(problem.goal_center)
    if np.hypot(*(pts[-1] - gc)) > problem.goal_radius:
        pts = np.vstack([pts, gc])
    if len(pts) < 2:
        raise EmptyPath("path has fewer than two points after normalization")
    return PredictedPath(pts, source)


def load_external_path(file_path, problem: PlanningProblem) -> PredictedPath:
    """Read a JSON array of ``[x, y]`` points produced by an external predictor.

    Points inside obstacles are kept; only bounds clamping and endpoint
    normalization are applied.
    """
    try:
        raw = json.loads(Path(file_path).read_text(encoding="utf-8"))
        pts = np.asarray(raw, dtype=np.float64)
    except (OSError, ValueError, TypeError) as exc:
        raise ParseError(f"cannot read path file {file_path}: {exc}") from exc
    if pts.size == 0:
        raise EmptyPath(f"{file_path} contains no points")
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ParseError(f"{file_path}: expected a list of [x, y] pairs")
    return normalize_path(pts, problem)
