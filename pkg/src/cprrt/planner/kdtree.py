"""Incremental 2-D kd-tree over node positions.

Points are inserted one at a time without rebalancing; RRT* inserts in
random sample order, which keeps the depth logarithmic in practice. Queries
break distance ties by the lower point index so results do not depend on
tree shape.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _insert(pts, left, right, axis, n):
    left[n] = -1
    right[n] = -1
    if n == 0:
        axis[0] = 0
        return 0
    node = 0
    depth = 0
    while True:
        ax = axis[node]
        depth += 1
        if pts[n, ax] < pts[node, ax]:
            if left[node] < 0:
                left[node] = n
                break
            node = left[node]
        else:
            if right[node] < 0:
                right[node] = n
                break
            node = right[node]
    axis[n] = 1 - axis[node]
    return depth


@njit(cache=True)
def _nearest(pts, left, right, axis, stack_n, stack_b, x, y):
    best = -1
    best_d = np.inf
    top = 0
    stack_n[0] = 0
    stack_b[0] = 0.0
    top = 1
    while top > 0:
        top -= 1
        node = stack_n[top]
        if stack_b[top] > best_d:
            continue
        dx = pts[node, 0] - x
        dy = pts[node, 1] - y
        d = dx * dx + dy * dy
        if d < best_d or (d == best_d and node < best):
            best_d = d
            best = node
        ax = axis[node]
        diff = (x if ax == 0 else y) - pts[node, ax]
        if diff < 0:
            near, far = left[node], right[node]
        else:
            near, far = right[node], left[node]
        if far >= 0:
            stack_n[top] = far
            stack_b[top] = diff * diff
            top += 1
        if near >= 0:
            stack_n[top] = near
            stack_b[top] = 0.0
            top += 1
    return best


@njit(cache=True)
def _knn(pts, left, right, axis, stack_n, stack_b, x, y, k):
    idx = np.full(k, -1, dtype=np.int64)
    dist = np.full(k, np.inf)
    top = 1
    stack_n[0] = 0
    stack_b[0] = 0.0
    while top > 0:
        top -= 1
        node = stack_n[top]
        if stack_b[top] > dist[k - 1]:
            continue
        dx = pts[node, 0] - x
        dy = pts[node, 1] - y
        d = dx * dx + dy * dy
        if d < dist[k - 1] or (d == dist[k - 1] and node < idx[k - 1]):
            j = k - 1
            while j > 0 and (d < dist[j - 1] or (d == dist[j - 1] and node < idx[j - 1])):
                dist[j] = dist[j - 1]
                idx[j] = idx[j - 1]
                j -= 1
            dist[j] = d
            idx[j] = node
        ax = axis[node]
        diff = (x if ax == 0 else y) - pts[node, ax]
        if diff < 0:
            near, far = left[node], right[node]
        else:
            near, far = right[node], left[node]
        if far >= 0:
            stack_n[top] = far
            stack_b[top] = diff * diff
            top += 1
        if near >= 0:
            stack_n[top] = near
            stack_b[top] = 0.0
            top += 1
    return idx


@njit(cache=True)
def _radius(pts, left, right, axis, stack_n, out, x, y, r):
    r2 = r * r
    cnt = 0
    top = 1
    stack_n[0] = 0
    while top > 0:
        top -= 1
        node = stack_n[top]
        dx = pts[node, 0] - x
        dy = pts[node, 1] - y
        if dx * dx + dy * dy <= r2:
            out[cnt] = node
            cnt += 1
        ax = axis[node]
        diff = (x if ax == 0 else y) - pts[node, ax]
        if diff <= r and left[node] >= 0:
            stack_n[top] = left[node]
            top += 1
        if diff >= -r and right[node] >= 0:
            stack_n[top] = right[node]
            top += 1
    return cnt


class KDTree2D:
    """Growable kd-tree; point ``i`` is the ``i``-th inserted position."""

    def __init__(self, capacity: int = 1024):
        self.pts = np.empty((capacity, 2))
        self.left = np.empty(capacity, dtype=np.int64)
        self.right = np.empty(capacity, dtype=np.int64)
        self.axis = np.empty(capacity, dtype=np.int64)
        self.n = 0
        self.max_depth = 0
        self._stack_n = np.empty(capacity + 2, dtype=np.int64)
        self._stack_b = np.empty(capacity + 2)
        self._out = np.empty(capacity, dtype=np.int64)

    def _grow(self):
        cap = 2 * len(self.pts)
        for name in ("pts", "left", "right", "axis", "_out"):
            old = getattr(self, name)
            new = np.empty((cap,) + old.shape[1:], dtype=old.dtype)
            new[: len(old)] = old
            setattr(self, name, new)

    def insert(self, x: float, y: float) -> int:
        if self.n == len(self.pts):
            self._grow()
        self.pts[self.n, 0] = x
        self.pts[self.n, 1] = y
        depth = _insert(self.pts, self.left, self.right, self.axis, self.n)
        self.n += 1
        if depth > self.max_depth:
            self.max_depth = depth
        # every stacked entry is a distinct node on a root-to-leaf walk's siblings
        need = 2 * self.max_depth + 4
        if len(self._stack_n) < need:
            self._stack_n = np.empty(2 * need, dtype=np.int64)
            self._stack_b = np.empty(2 * need)
        return self.n - 1

    def nearest(self, x: float, y: float) -> int:
        return int(_nearest(self.pts, self.left, self.right, self.axis,
                            self._stack_n, self._stack_b, x, y))

    def knn(self, x: float, y: float, k: int) -> np.ndarray:
        k = min(k, self.n)
        idx = _knn(self.pts, self.left, self.right, self.axis,
                   self._stack_n, self._stack_b, x, y, k)
        return idx

    def radius(self, x: float, y: float, r: float) -> np.ndarray:
        cnt = _radius(self.pts, self.left, self.right, self.axis,
                      self._stack_n, self._out, x, y, r)
        return np.sort(self._out[:cnt])
