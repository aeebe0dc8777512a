"""Compiled geometry kernels shared by the environment, predictor and planner.

Rectangles are rows ``[xmin, ymin, xmax, ymax]``; bounds is one such row.
All membership tests treat rectangle boundaries as occupied and world
bounds as closed.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def point_free(x, y, rects, bounds):
    if x < bounds[0] or x > bounds[2] or y < bounds[1] or y > bounds[3]:
        return False
    for i in range(rects.shape[0]):
        if rects[i, 0] <= x <= rects[i, 2] and rects[i, 1] <= y <= rects[i, 3]:
            return False
    return True


@njit(cache=True)
def points_free(pts, rects, bounds):
    out = np.empty(pts.shape[0], dtype=np.bool_)
    for i in range(pts.shape[0]):
        out[i] = point_free(pts[i, 0], pts[i, 1], rects, bounds)
    return out


@njit(cache=True)
def segment_free(ax, ay, bx, by, resolution, rects, bounds):
    length = math.sqrt((bx - ax) * (bx - ax) + (by - ay) * (by - ay))
    n = int(math.ceil(length / resolution))
    if n < 1:
        n = 1
    for i in range(n + 1):
        # interpolate from the nearer endpoint so that reversing the segment
        # produces bit-identical samples
        if 2 * i < n:
            s = i / n
            x = ax + s * (bx - ax)
            y = ay + s * (by - ay)
        elif 2 * i > n:
            s = (n - i) / n
            x = bx + s * (ax - bx)
            y = by + s * (ay - by)
        else:
            x = 0.5 * (ax + bx)
            y = 0.5 * (ay + by)
        if not point_free(x, y, rects, bounds):
            return False
    return True


@njit(cache=True)
def polyline_free(pts, resolution, rects, bounds):
    if pts.shape[0] == 1:
        return point_free(pts[0, 0], pts[0, 1], rects, bounds)
    for i in range(pts.shape[0] - 1):
        if not segment_free(pts[i, 0], pts[i, 1], pts[i + 1, 0], pts[i + 1, 1],
                            resolution, rects, bounds):
            return False
    return True


@njit(cache=True)
def euclid(ax, ay, bx, by):
    # single distance formula shared by every NCS / prediction-set route
    dx = ax - bx
    dy = ay - by
    return math.sqrt(dx * dx + dy * dy)


@njit(cache=True)
def nearest_index(path, x, y):
    best = 0
    best_d = np.inf
    for k in range(path.shape[0]):
        d = euclid(x, y, path[k, 0], path[k, 1])
        if d < best_d:
            best_d = d
            best = k
    return best


@njit(cache=True)
def assign_cells(path, pts):
    idx = np.empty(pts.shape[0], dtype=np.int64)
    dist = np.empty(pts.shape[0], dtype=np.float64)
    for i in range(pts.shape[0]):
        k = nearest_index(path, pts[i, 0], pts[i, 1])
        idx[i] = k
        dist[i] = euclid(pts[i, 0], pts[i, 1], path[k, 0], path[k, 1])
    return idx, dist


@njit(cache=True)
def in_voronoi_cell(path, k, x, y):
    """Whether waypoint ``k`` is the (lowest-index) nearest waypoint to (x, y).

    Scans outward from ``k`` so that points owned by a neighbouring waypoint
    are rejected after a few distance evaluations.
    """
    dk = euclid(x, y, path[k, 0], path[k, 1])
    n = path.shape[0]
    for step in range(1, n):
        lo = k - step
        hi = k + step
        if lo < 0 and hi >= n:
            break
        if lo >= 0 and euclid(x, y, path[lo, 0], path[lo, 1]) <= dk:
            return False
        if hi < n and euclid(x, y, path[hi, 0], path[hi, 1]) < dk:
            return False
    return True


@njit(cache=True)
def lattice_mask(rects, bounds, spacing, nx, ny):
    """Free mask of nodes ``bounds.min + spacing * (i, j)``; same closed-set rules as point_free."""
    free = np.ones((nx, ny), dtype=np.bool_)
    for i in range(nx):
        x = bounds[0] + spacing * i
        if x > bounds[2]:
            free[i, :] = False
    for j in range(ny):
        y = bounds[1] + spacing * j
        if y > bounds[3]:
            free[:, j] = False
    for r in range(rects.shape[0]):
        # candidate index ranges padded by one, then tested exactly
        i0 = max(int(math.floor((rects[r, 0] - bounds[0]) / spacing)) - 1, 0)
        i1 = min(int(math.ceil((rects[r, 2] - bounds[0]) / spacing)) + 1, nx - 1)
        j0 = max(int(math.floor((rects[r, 1] - bounds[1]) / spacing)) - 1, 0)
        j1 = min(int(math.ceil((rects[r, 3] - bounds[1]) / spacing)) + 1, ny - 1)
        for i in range(i0, i1 + 1):
            x = bounds[0] + spacing * i
            if x < rects[r, 0] or x > rects[r, 2]:
                continue
            for j in range(j0, j1 + 1):
                y = bounds[1] + spacing * j
                if rects[r, 1] <= y <= rects[r, 3]:
                    free[i, j] = False
    return free


@njit(cache=True)
def rasterize(rects, bounds, cell):
    nx = int(round((bounds[2] - bounds[0]) / cell))
    ny = int(round((bounds[3] - bounds[1]) / cell))
    occ = np.zeros((nx, ny), dtype=np.bool_)
    for r in range(rects.shape[0]):
        i0 = int(math.ceil((rects[r, 0] - bounds[0]) / cell - 0.5))
        i1 = int(math.floor((rects[r, 2] - bounds[0]) / cell - 0.5))
        j0 = int(math.ceil((rects[r, 1] - bounds[1]) / cell - 0.5))
        j1 = int(math.floor((rects[r, 3] - bounds[1]) / cell - 0.5))
        i0 = max(i0, 0)
        j0 = max(j0, 0)
        i1 = min(i1, nx - 1)
        j1 = min(j1, ny - 1)
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                occ[i, j] = True
    return occ


@njit(cache=True)
def straight_choose_parent(near, cost, states, x, y, i_near, best_cost, resolution,
                           rects, bounds):
    """Cheapest collision-free straight-line parent among ``near``.

    Candidates are tried in increasing order of ``cost + distance`` (stable
    on ties), so the first free one wins. Returns ``(parent, cost)``, or
    ``(-1, best_cost)`` when nothing beats ``best_cost``.
    """
    m = near.shape[0]
    est = np.empty(m)
    for i in range(m):
        c = near[i]
        est[i] = cost[c] + math.hypot(states[c, 0] - x, states[c, 1] - y)
    order = np.argsort(est, kind="mergesort")
    for t in range(m):
        i = order[t]
        if est[i] >= best_cost:
            break
        c = near[i]
        if c == i_near or (states[c, 0] == x and states[c, 1] == y):
            continue
        if segment_free(states[c, 0], states[c, 1], x, y, resolution, rects, bounds):
            return c, est[i]
    return -1, best_cost


@njit(cache=True)
def straight_rewire_candidates(near, parent, cost, states, x, y, new_cost, resolution,
                               rects, bounds):
    """Neighbours (in ``near`` order) whose cost drops via a free edge from ``(x, y)``."""
    out = np.empty(near.shape[0], dtype=near.dtype)
    m = 0
    for i in range(near.shape[0]):
        c = near[i]
        if c == parent:
            continue
        d = math.hypot(x - states[c, 0], y - states[c, 1])
        if new_cost + d < cost[c] - 1e-9 and segment_free(x, y, states[c, 0], states[c, 1],
                                                          resolution, rects, bounds):
            out[m] = c
            m += 1
    return out[:m]
