"""2-D workspaces with axis-aligned rectangular obstacles.

A :class:`World` is the bounded workspace and its obstacle set; a
:class:`PlanningProblem` adds the start position and the circular goal
region. Both are immutable. Generators for the cluttered density family and
for corridor mazes take explicit seeds.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from . import _kernels as K

Rect = tuple[float, float, float, float]

DEFAULT_RESOLUTION = 0.25
RASTER_CELL = 0.5
# one turning diameter at a 5 m radius: a Dubins root heading east can complete a full left turn
START_CLEARANCE = 10.0
GOAL_CLEARANCE = 10.0
# coarse maze grid; a 14.3 m corridor pitch leaves room for U-turns at a 5 m turning radius
MAZE_CELLS = 7


class WorldGenerationError(RuntimeError):
    """Raised when a generator cannot satisfy its clearance/solvability rules."""


@dataclass(frozen=True)
class World:
    bounds: Rect = (0.0, 0.0, 100.0, 100.0)
    obstacles: tuple[Rect, ...] = ()
    density_label: Optional[int] = None
    rects: np.ndarray = field(init=False, repr=False, compare=False)
    bounds_arr: np.ndarray = field(init=False, repr=False, compare=False)
    diagonal: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        obstacles = tuple(tuple(float(v) for v in r) for r in self.obstacles)
        bounds = tuple(float(v) for v in self.bounds)
        bx0, by0, bx1, by1 = bounds
        for r in obstacles:
            if not (r[0] <= r[2] and r[1] <= r[3]):
                raise ValueError(f"malformed rectangle {r}")
            if r[0] < bx0 or r[1] < by0 or r[2] > bx1 or r[3] > by1:
                raise ValueError(f"obstacle {r} lies outside bounds {bounds}")
        object.__setattr__(self, "obstacles", obstacles)
        object.__setattr__(self, "bounds", bounds)
        rects = np.array(obstacles, dtype=np.float64).reshape(-1, 4)
        rects.setflags(write=False)
        barr = np.array(bounds, dtype=np.float64)
        barr.setflags(write=False)
        object.__setattr__(self, "rects", rects)
        object.__setattr__(self, "bounds_arr", barr)
        object.__setattr__(self, "diagonal", math.hypot(bx1 - bx0, by1 - by0))

    @property
    def width(self) -> float:
        return self.bounds[2] - self.bounds[0]

    @property
    def height(self) -> float:
        return self.bounds[3] - self.bounds[1]

    def occupancy(self, cell: float = RASTER_CELL) -> float:
        """Fraction of raster cells (by cell center) covered by obstacles."""
        grid = K.rasterize(self.rects, self.bounds_arr, cell)
        return float(grid.mean())


@dataclass(frozen=True)
class PlanningProblem:
    world: World
    start: tuple[float, float] = (0.0, 0.0)
    goal_center: tuple[float, float] = (100.0, 100.0)
    goal_radius: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        object.__setattr__(self, "goal_center", tuple(float(v) for v in self.goal_center))
        object.__setattr__(self, "goal_radius", float(self.goal_radius))


def is_free(world: World, point: Sequence[float]) -> bool:
    return bool(K.point_free(float(point[0]), float(point[1]), world.rects, world.bounds_arr))


def points_free(world: World, pts: np.ndarray) -> np.ndarray:
    pts = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 2)
    return K.points_free(pts, world.rects, world.bounds_arr)


def segment_free(world: World, a: Sequence[float], b: Sequence[float],
                 resolution: float = DEFAULT_RESOLUTION) -> bool:
    """True iff every sample along ``[a, b]`` at spacing <= resolution is free.

    Both endpoints are always sampled.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    return bool(K.segment_free(float(a[0]), float(a[1]), float(b[0]), float(b[1]),
                               resolution, world.rects, world.bounds_arr))


def polyline_free(world: World, pts: np.ndarray,
                  resolution: float = DEFAULT_RESOLUTION) -> bool:
    pts = np.ascontiguousarray(pts[:, :2], dtype=np.float64)
    return bool(K.polyline_free(pts, resolution, world.rects, world.bounds_arr))


def in_goal(problem: PlanningProblem, state: Sequence[float]) -> bool:
    gx, gy = problem.goal_center
    return math.hypot(float(state[0]) - gx, float(state[1]) - gy) <= problem.goal_radius


def lattice_free(world: World, spacing: float = 1.0) -> np.ndarray:
    """Free mask of lattice nodes ``bounds.min + spacing * (i, j)``, indexed ``[i, j]``."""
    nx = int(round(world.width / spacing)) + 1
    ny = int(round(world.height / spacing)) + 1
    return K.lattice_mask(world.rects, world.bounds_arr, float(spacing), nx, ny)


def _rect_hits_disc(r: Rect, cx: float, cy: float, radius: float) -> bool:
    px = min(max(cx, r[0]), r[2])
    py = min(max(cy, r[1]), r[3])
    return math.hypot(px - cx, py - cy) <= radius


def passage_connected(problem: PlanningProblem, width: float = 1.0, spacing: float = 0.5) -> bool:
    """Whether start and goal are joined by a corridor at least ``width`` wide.

    Obstacles are inflated by ``width / 2`` and the remaining grid nodes are
    labelled 4-connected. The world boundary is not inflated beyond keeping
    nodes ``width / 2`` inside it.
    """
    h = width / 2.0
    x0, y0, x1, y1 = problem.world.bounds
    xs = np.arange(x0 + h, x1 - h + 1e-9, spacing)
    ys = np.arange(y0 + h, y1 - h + 1e-9, spacing)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    rects = problem.world.rects + np.array([-h, -h, h, h])
    free = K.points_free(np.column_stack([gx.ravel(), gy.ravel()]), rects,
                         problem.world.bounds_arr).reshape(gx.shape)
    labels, _ = ndimage.label(free)
    sx, sy = problem.start[0], problem.start[1]
    si = int(np.argmin(np.abs(xs - sx)))
    sj = int(np.argmin(np.abs(ys - sy)))
    if not free[si, sj]:
        return False
    cx, cy = problem.goal_center
    in_disc = free & (np.hypot(gx - cx, gy - cy) <= problem.goal_radius)
    return bool(np.any(labels[in_disc] == labels[si, sj]))


def generate_density_world(density_percent: int, seed: int, *,
                           side_range: tuple[float, float] = (2.0, 8.0),
                           max_retries: int = 100) -> PlanningProblem:
    """Random rectangle clutter covering ``density_percent`` % of a 100 m square.

    Rectangles are added until the rasterized occupancy reaches the target;
    any rectangle that would overshoot the target by more than one point, or
    touch the 10 m clearance discs around start and goal center, is
    discarded. Worlds where no corridor of at least 1 m joins start and goal
    are regenerated.
    """
    if not 1 <= density_percent <= 60:
        raise ValueError("density_percent must be in [1, 60]")
    target = density_percent / 100.0
    cell = RASTER_CELL
    bounds = (0.0, 0.0, 100.0, 100.0)
    start, goal, goal_r = (0.0, 0.0), (100.0, 100.0), 3.0
    n_cells = int(100 / cell) ** 2
    lo, hi = side_range
    ss = np.random.SeedSequence([int(seed), int(density_percent)])
    for attempt_ss in ss.spawn(max_retries):
        rng = np.random.default_rng(attempt_ss)
        occ = np.zeros((int(100 / cell), int(100 / cell)), dtype=bool)
        filled = 0
        rects: list[Rect] = []
        misses = 0
        while filled < target * n_cells and misses < 5000:
            w, h = rng.uniform(lo, hi, size=2)
            x0 = rng.uniform(bounds[0], bounds[2] - w)
            y0 = rng.uniform(bounds[1], bounds[3] - h)
            # 6 decimals keep JSON round-trips exact at 9 significant digits
            r = (round(float(x0), 6), round(float(y0), 6),
                 round(float(x0 + w), 6), round(float(y0 + h), 6))
            if (_rect_hits_disc(r, *start, START_CLEARANCE)
                    or _rect_hits_disc(r, *goal, max(goal_r, GOAL_CLEARANCE))):
                misses += 1
                continue
            i0 = int(math.ceil(r[0] / cell - 0.5))
            i1 = int(math.floor(r[2] / cell - 0.5))
            j0 = int(math.ceil(r[1] / cell - 0.5))
            j1 = int(math.floor(r[3] / cell - 0.5))
            patch = occ[i0:i1 + 1, j0:j1 + 1]
            added = patch.size - int(patch.sum())
            if filled + added > (target + 0.01) * n_cells:
                misses += 1
                continue
            patch[...] = True
            filled += added
            rects.append(r)
        if filled < target * n_cells:
            continue
        problem = PlanningProblem(World(bounds, tuple(rects), density_percent),
                                  start, goal, goal_r)
        if passage_connected(problem):
            return problem
    raise WorldGenerationError(
        f"could not generate a solvable density-{density_percent} world "
        f"with start/goal clearance after {max_retries} attempts")


def _backtracker_passages(n: int, rng: np.random.Generator) -> set[tuple[tuple[int, int], tuple[int, int]]]:
    passages = set()
    visited = np.zeros((n, n), dtype=bool)
    stack = [(0, 0)]
    visited[0, 0] = True
    while stack:
        i, j = stack[-1]
        nbrs = [(i + di, j + dj) for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))
                if 0 <= i + di < n and 0 <= j + dj < n and not visited[i + di, j + dj]]
        if not nbrs:
            stack.pop()
            continue
        nxt = nbrs[int(rng.integers(len(nbrs)))]
        visited[nxt] = True
        passages.add(tuple(sorted(((i, j), nxt))))
        stack.append(nxt)
    return passages


def generate_maze_world(seed: int, *, cells: int = MAZE_CELLS, wall: float = 2.0,
                        size: float = 100.0) -> PlanningProblem:
    """Perfect maze (recursive backtracker) with walls as thick rectangles.

    The outer boundary is the world bound itself; only interior walls are
    emitted, each extended by half the wall thickness so corners close.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6D617A65]))
    passages = _backtracker_passages(cells, rng)
    c = size / cells
    half = wall / 2.0
    rects = []

    def clip(r):
        return (max(r[0], 0.0), max(r[1], 0.0), min(r[2], size), min(r[3], size))

    for i in range(cells):
        for j in range(cells):
            if i + 1 < cells and ((i, j), (i + 1, j)) not in passages:
                x = c * (i + 1)
                rects.append(clip((x - half, c * j - half, x + half, c * (j + 1) + half)))
            if j + 1 < cells and ((i, j), (i, j + 1)) not in passages:
                y = c * (j + 1)
                rects.append(clip((c * i - half, y - half, c * (i + 1) + half, y + half)))
    world = World((0.0, 0.0, size, size), tuple(rects), None)
    return PlanningProblem(world, (0.0, 0.0), (size, size), 3.0)


def maze_cell_graph_connected(problem: PlanningProblem, cells: int = MAZE_CELLS) -> bool:
    """BFS over coarse maze cells, adjacency read back from free space.

    Two neighbouring cells are linked iff the midpoint of their shared side is
    free in the world.
    """
    c = problem.world.width / cells
    seen = {(0, 0)}
    q = deque([(0, 0)])
    while q:
        i, j = q.popleft()
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i + di, j + dj
            if not (0 <= a < cells and 0 <= b < cells) or (a, b) in seen:
                continue
            mid = (c * (i + 0.5 + di / 2), c * (j + 0.5 + dj / 2))
            if is_free(problem.world, mid):
                seen.add((a, b))
                q.append((a, b))
    return (cells - 1, cells - 1) in seen


def problem_to_dict(problem: PlanningProblem) -> dict:
    w = problem.world
    d = {
        "bounds": list(w.bounds),
        "obstacles": [list(r) for r in w.obstacles],
        "start": list(problem.start),
        "goal_center": list(problem.goal_center),
        "goal_radius": problem.goal_radius,
    }
    if w.density_label is not None:
        d["density"] = w.density_label
    return d


def problem_from_dict(d: dict) -> PlanningProblem:
    world = World(tuple(d["bounds"]), tuple(tuple(r) for r in d["obstacles"]),
                  d.get("density"))
    return PlanningProblem(world, tuple(d["start"]), tuple(d["goal_center"]),
                           d["goal_radius"])


def save_problem(problem: PlanningProblem, path) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(problem)), encoding="utf-8")


def load_problem(path) -> PlanningProblem:
    return problem_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
