"""RRT* search tree with eager cost propagation."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..dynamics import ModelParams, Trajectory, connect
from .kdtree import KDTree2D


class Tree:
    """Nodes are integer ids; node 0 is the root with cost 0 and no parent.

    Holonomic edges may be stored as None: a straight segment is fully
    determined by its endpoints, so :meth:`edge` rebuilds it on demand.
    """

    def __init__(self, root: np.ndarray, model: str = "holonomic", capacity: int = 1024):
        root = np.asarray(root, dtype=np.float64)
        self.model = model
        self.dim = root.shape[0]
        self.states = np.empty((capacity, self.dim))
        self.parent = np.full(capacity, -1, dtype=np.int64)
        self.cost = np.empty(capacity)
        self.incoming: list[Optional[Trajectory]] = []
        self.children: list[list[int]] = []
        self.index = KDTree2D(capacity)
        self.size = 0
        self._append(root, -1, None, 0.0)

    def __len__(self):
        return self.size

    def _append(self, state, parent, traj, cost):
        if self.size == len(self.states):
            cap = 2 * len(self.states)
            self.states = np.concatenate([self.states, np.empty((cap - self.size, self.dim))])
            self.parent = np.concatenate([self.parent, np.full(cap - self.size, -1, dtype=np.int64)])
            self.cost = np.concatenate([self.cost, np.empty(cap - self.size)])
        i = self.size
        self.states[i] = state
        self.parent[i] = parent
        self.cost[i] = cost
        self.incoming.append(traj)
        self.children.append([])
        self.index.insert(state[0], state[1])
        self.size += 1
        return i

    def add(self, state: np.ndarray, parent: int, traj: Optional[Trajectory], cost: float) -> int:
        i = self._append(state, parent, traj, cost)
        self.children[parent].append(i)
        return i

    def rewire(self, node: int, new_parent: int, traj: Optional[Trajectory],
               new_cost: float) -> None:
        """Re-parent ``node`` and shift the cost of its whole subtree."""
        old = int(self.parent[node])
        self.children[old].remove(node)
        self.children[new_parent].append(node)
        self.parent[node] = new_parent
        self.incoming[node] = traj
        delta = new_cost - self.cost[node]
        stack = [node]
        while stack:
            i = stack.pop()
            self.cost[i] += delta
            stack.extend(self.children[i])
        self.cost[node] = new_cost

    def edge(self, node: int) -> Trajectory:
        """Incoming trajectory of a non-root node."""
        traj = self.incoming[node]
        if traj is None:
            parent = int(self.parent[node])
            traj = connect(ModelParams("holonomic"), self.states[parent], self.states[node])
        return traj

    def path_to(self, node: int) -> list[int]:
        out = []
        while node >= 0:
            out.append(node)
            node = int(self.parent[node])
        return out[::-1]

    def view_states(self) -> np.ndarray:
        return self.states[: self.size]

    def view_costs(self) -> np.ndarray:
        return self.cost[: self.size]

    def check_invariants(self, atol: float = 1e-6) -> None:
        """Raise AssertionError if costs or parent links are inconsistent."""
        assert self.parent[0] == -1 and self.cost[0] == 0.0
        for i in range(1, self.size):
            p = int(self.parent[i])
            assert 0 <= p < self.size, f"node {i} has invalid parent {p}"
            expect = self.cost[p] + self.edge(i).length
            assert abs(self.cost[i] - expect) <= atol, (
                f"node {i}: cost {self.cost[i]} != parent {expect}")
        # every node reaches the root without revisiting
        depth = np.full(self.size, -1)
        depth[0] = 0
        for i in range(1, self.size):
            chain = []
            j = i
            while depth[j] < 0:
                chain.append(j)
                j = int(self.parent[j])
                assert len(chain) <= self.size, "parent links contain a cycle"
            for k in reversed(chain):
                depth[k] = depth[int(self.parent[k])] + 1

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": i, "parent": int(self.parent[i]), "state": self.states[i].tolist(),
                 "cost": float(self.cost[i])}
                for i in range(self.size)
            ]
        }
