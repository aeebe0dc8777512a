"""State samplers: uniform, goal-biased Gaussian and prediction-set biased.

Every sampler draws from two independent streams. The main stream produces
the uniform free-space samples; the bias stream produces coin flips, index
selections and the biased draws. A prediction-set sampler with
``p_bias = 0`` therefore consumes the main stream exactly like the uniform
sampler and grows an identical tree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .. import _kernels as K
from ..conformal import PredictionRegions
from ..dynamics import ModelParams
from ..env import PlanningProblem, World

KINDS = ("uniform", "goal_biased", "cp")
BLOCK = 16
REGION_BLOCK = 8


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    kind: str = "uniform"
    p_bias: float = 0.5
    goal_bias: float = 0.1
    goal_std: float = 10.0
    k_selection: str = "uniform_random"
    max_attempts: int = 200

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if not 0.0 <= self.p_bias < 1.0:
            raise ValueError("p_bias must lie in [0, 1)")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError("goal_bias must lie in [0, 1]")
        if self.k_selection not in ("uniform_random", "cyclic"):
            raise ValueError(f"unknown k_selection {self.k_selection!r}")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@njit(cache=True)
def _first_free_in_box(u, x0, y0, w, h, rects, bounds):
    for i in range(u.shape[0]):
        x = x0 + u[i, 0] * w
        y = y0 + u[i, 1] * h
        if K.point_free(x, y, rects, bounds):
            return i, x, y
    return -1, 0.0, 0.0


@njit(cache=True)
def _first_free_point(pts, rects, bounds):
    for i in range(pts.shape[0]):
        if K.point_free(pts[i, 0], pts[i, 1], rects, bounds):
            return i
    return -1


OCTAGON_STRETCH = 1.0 / math.cos(math.pi / 8)
# bisectors of waypoints more than this many steps away rarely tighten a cell
CUT_WINDOW = 8


@njit(cache=True)
def _clip(src, n, dst, nx, ny, c):
    """Write into ``dst`` the part of convex ``src[:n]`` where ``nx * x + ny * y <= c``."""
    m = 0
    for i in range(n):
        ax, ay = src[i, 0], src[i, 1]
        bx, by = src[(i + 1) % n, 0], src[(i + 1) % n, 1]
        da = nx * ax + ny * ay - c
        db = nx * bx + ny * by - c
        if da <= 0.0:
            dst[m, 0], dst[m, 1] = ax, ay
            m += 1
        if (da < 0.0 < db) or (db < 0.0 < da):
            t = da / (da - db)
            dst[m, 0] = ax + t * (bx - ax)
            dst[m, 1] = ay + t * (by - ay)
            m += 1
    return m


@njit(cache=True)
def _cutting_waypoints(path, k, half, window):
    """Waypoints within ``window`` steps of ``k`` whose bisector passes within ``half`` of it."""
    px, py = path[k, 0], path[k, 1]
    out = np.empty(path.shape[0], dtype=np.int64)
    m = 0
    for j in range(max(0, k - window), min(path.shape[0], k + window + 1)):
        d = math.hypot(path[j, 0] - px, path[j, 1] - py)
        if j != k and 0.0 < d < 2.0 * half:
            out[m] = j
            m += 1
    return out[:m]


@njit(cache=True)
def cell_proposal(path, k, half, bounds, window=CUT_WINDOW):
    """Convex polygon containing the part of ``V(k)`` in the disc of radius ``half``.

    The octagon circumscribing the disc is clipped to the world bounds and
    cut by the bisectors with waypoints up to ``window`` steps away. Every
    cut keeps the side of ``p_k``, so the result covers the in-bounds part
    of the point-wise set. Returns ``(vertices, n)``, n = 0 if empty.
    """
    px, py = path[k, 0], path[k, 1]
    cuts = _cutting_waypoints(path, k, half, window)
    cap = 8 + cuts.shape[0] + 5
    poly = np.empty((cap, 2))
    buf = np.empty((cap, 2))
    r = half * OCTAGON_STRETCH
    for i in range(8):
        ang = math.pi / 8 + i * math.pi / 4
        poly[i, 0] = px + r * math.cos(ang)
        poly[i, 1] = py + r * math.sin(ang)
    n = 8
    # world bounds first: x >= x0, x <= x1, y >= y0, y <= y1
    for nx, ny, c in ((-1.0, 0.0, -bounds[0]), (1.0, 0.0, bounds[2]),
                      (0.0, -1.0, -bounds[1]), (0.0, 1.0, bounds[3])):
        n = _clip(poly, n, buf, nx, ny, c)
        poly, buf = buf, poly
        if n < 3:
            return poly, 0
    for j in cuts:
        nx = path[j, 0] - px
        ny = path[j, 1] - py
        # points nearer to p_k than p_j; a small slack keeps the cover closed
        c = 0.5 * (nx * (path[j, 0] + px) + ny * (path[j, 1] + py)) + 1e-9 * (abs(nx) + abs(ny))
        n = _clip(poly, n, buf, nx, ny, c)
        poly, buf = buf, poly
        if n < 3:
            return poly, 0
    return poly, n


@njit(cache=True)
def _fan_areas(poly, n, cum):
    """Cumulative areas of the fan triangles of ``poly[:n]``; returns the total."""
    total = 0.0
    for t in range(n - 2):
        ax = poly[t + 1, 0] - poly[0, 0]
        ay = poly[t + 1, 1] - poly[0, 1]
        bx = poly[t + 2, 0] - poly[0, 0]
        by = poly[t + 2, 1] - poly[0, 1]
        total += 0.5 * abs(ax * by - ay * bx)
        cum[t] = total
    return total


@njit(cache=True)
def _cell(path, k, half, bounds):
    """Proposal polygon of cell ``k`` with cumulative fan-triangle areas; n = 0 if empty."""
    poly, n = cell_proposal(path, k, half, bounds)
    cum = np.zeros(max(n - 2, 1))
    if n < 3 or _fan_areas(poly, n, cum) <= 0.0:
        return poly, 0, cum
    return poly, n, cum


@njit(cache=True)
def _cell_table(path, half, bounds):
    m = path.shape[0]
    cap = 3
    for k in range(m):
        cap = max(cap, 13 + _cutting_waypoints(path, k, half, CUT_WINDOW).shape[0])
    polys = np.zeros((m, cap, 2))
    ns = np.zeros(m, dtype=np.int64)
    cums = np.zeros((m, cap))
    for k in range(m):
        poly, n = cell_proposal(path, k, half, bounds)
        polys[k, :n] = poly[:n]
        if n >= 3 and _fan_areas(poly, n, cums[k]) > 0.0:
            ns[k] = n
    return polys, ns, cums


@dataclass(frozen=True)
class CellTable:
    """Per-waypoint proposal polygons, computed once per (regions, world)."""
    polys: np.ndarray
    sizes: np.ndarray
    areas: np.ndarray

    @classmethod
    def build(cls, regions: PredictionRegions, world: World) -> "CellTable":
        half = min(regions.q_hat, world.diagonal)
        return cls(*_cell_table(regions.path.points, half, world.bounds_arr))


@njit(cache=True)
def _first_in_cell(u, path, k, q_hat, poly, n, cum, rects, bounds):
    if n < 3:
        return -1, 0.0, 0.0
    # the polygon is a fan of n - 2 triangles; pick one by area, then a point in it
    total = cum[n - 3]
    px, py = path[k, 0], path[k, 1]
    for i in range(u.shape[0]):
        target = u[i, 0] * total
        t = 0
        while t < n - 3 and cum[t] <= target:
            t += 1
        r1, r2 = u[i, 1], u[i, 2]
        if r1 + r2 > 1.0:
            r1, r2 = 1.0 - r1, 1.0 - r2
        x = poly[0, 0] + r1 * (poly[t + 1, 0] - poly[0, 0]) + r2 * (poly[t + 2, 0] - poly[0, 0])
        y = poly[0, 1] + r1 * (poly[t + 1, 1] - poly[0, 1]) + r2 * (poly[t + 2, 1] - poly[0, 1])
        if K.euclid(x, y, px, py) > q_hat:
            continue
        if not K.point_free(x, y, rects, bounds):
            continue
        if K.in_voronoi_cell(path, k, x, y):
            return i, x, y
    return -1, 0.0, 0.0


def _extra(params: ModelParams, rng: np.random.Generator, pos) -> np.ndarray:
    if params.model == "holonomic":
        return np.array(pos, dtype=np.float64)
    x = np.empty(params.dim)
    x[0], x[1] = pos
    for j, (lo, hi) in enumerate(params.extra_dims()):
        x[2 + j] = rng.uniform(lo, hi)
    return x


def uniform_free_sample(world: World, params: ModelParams, rng: np.random.Generator,
                        max_blocks: int = 100_000) -> np.ndarray:
    """Uniform over free space (rejection); extra state dims uniform over their ranges."""
    x0, y0, x1, y1 = world.bounds
    for _ in range(max_blocks):
        u = rng.random((BLOCK, 2))
        i, x, y = _first_free_in_box(u, x0, y0, x1 - x0, y1 - y0, world.rects, world.bounds_arr)
        if i >= 0:
            return _extra(params, rng, (x, y))
    raise SamplingError("free space appears to be empty")


def goal_biased_sample(problem: PlanningProblem, params: ModelParams, cfg: SamplerConfig,
                       rng: np.random.Generator, rng_bias: Optional[np.random.Generator] = None,
                       stats: Optional[dict] = None) -> np.ndarray:
    """Gaussian around the goal center with probability ``cfg.goal_bias``, else uniform.

    Gaussian draws are resampled until free, up to ``cfg.max_attempts``; on
    exhaustion the draw falls back to uniform.
    """
    rb = rng if rng_bias is None else rng_bias
    world = problem.world
    if cfg.goal_bias > 0.0 and rb.random() < cfg.goal_bias:
        pts = np.asarray(problem.goal_center) + cfg.goal_std * rb.standard_normal((cfg.max_attempts, 2))
        i = _first_free_point(pts, world.rects, world.bounds_arr)
        if i >= 0:
            return _extra(params, rb, pts[i])
        if stats is not None:
            stats["fallbacks"] = stats.get("fallbacks", 0) + 1
    return uniform_free_sample(world, params, rng)


def select_index(cfg: SamplerConfig, n_points: int, rng_bias: np.random.Generator,
                 counter: int) -> int:
    if cfg.k_selection == "cyclic":
        return counter % n_points
    # a scalar float draw is several times cheaper than Generator.integers
    return min(int(rng_bias.random() * n_points), n_points - 1)


def sample_in_region(regions: PredictionRegions, world: World, params: ModelParams, k: int,
                     rng_bias: np.random.Generator, max_attempts: int = 200,
                     table: Optional[CellTable] = None) -> Optional[np.ndarray]:
    """Uniform draw from the free part of point-wise set ``k`` or None if rejection fails.

    Candidates are uniform on :func:`cell_proposal`'s polygon for radius
    ``min(q_hat, world diagonal)`` and accepted when inside the ball, free
    and in ``V(k)``.
    ``table`` caches the polygons across calls with the same regions and world.
    """
    path = regions.path.points
    if table is None:
        poly, n, cum = _cell(path, k, min(regions.q_hat, world.diagonal), world.bounds_arr)
    else:
        poly, n, cum = table.polys[k], table.sizes[k], table.areas[k]
    left = max_attempts
    while left > 0:
        # blocks keep the common case (early acceptance) cheap
        u = rng_bias.random((min(left, REGION_BLOCK), 3))
        i, x, y = _first_in_cell(u, path, k, regions.q_hat, poly, n, cum,
                                 world.rects, world.bounds_arr)
        if i >= 0:
            return _extra(params, rng_bias, (x, y))
        left -= len(u)
    return None


def sample_cp(regions: PredictionRegions, world: World, cfg: SamplerConfig,
              rng: np.random.Generator, rng_bias: Optional[np.random.Generator] = None,
              params: ModelParams = ModelParams(), counter: int = 0,
              stats: Optional[dict] = None, table: Optional[CellTable] = None) -> np.ndarray:
    """One draw from ``(1 - p_bias) U(free) + p_bias U(free ∩ C_k)`` for a selected k."""
    rb = rng if rng_bias is None else rng_bias
    # k is independent of the coin, so it is only drawn when it is used
    if cfg.p_bias > 0.0 and rb.random() < cfg.p_bias:
        k = select_index(cfg, len(regions.path), rb, counter)
        x = sample_in_region(regions, world, params, k, rb, cfg.max_attempts, table)
        if x is not None:
            return x
        if stats is not None:
            stats["fallbacks"] = stats.get("fallbacks", 0) + 1
    return uniform_free_sample(world, params, rng)


class Sampler:
    """Stateful sampler used by the planner; owns both random streams."""

    def __init__(self, problem: PlanningProblem, params: ModelParams, cfg: SamplerConfig,
                 seed: int | np.random.SeedSequence, regions: Optional[PredictionRegions] = None):
        if cfg.kind == "cp" and regions is None:
            raise ValueError("the cp sampler needs prediction regions")
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        main, bias = ss.spawn(2)
        self.rng = np.random.default_rng(main)
        self.rng_bias = np.random.default_rng(bias)
        self.problem = problem
        self.params = params
        self.cfg = cfg
        self.regions = regions
        self.table = CellTable.build(regions, problem.world) if cfg.kind == "cp" else None
        self.stats = {"fallbacks": 0}
        self.counter = 0

    @property
    def fallbacks(self) -> int:
        return self.stats["fallbacks"]

    def draw(self) -> np.ndarray:
        self.counter += 1
        kind = self.cfg.kind
        if kind == "uniform":
            return uniform_free_sample(self.problem.world, self.params, self.rng)
        if kind == "goal_biased":
            return goal_biased_sample(self.problem, self.params, self.cfg, self.rng,
                                      self.rng_bias, self.stats)
        return sample_cp(self.regions, self.problem.world, self.cfg, self.rng, self.rng_bias,
                         self.params, self.counter - 1, self.stats, self.table)
