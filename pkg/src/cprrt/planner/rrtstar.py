"""RRT* with pluggable samplers (uniform, goal-biased, prediction-set biased)."""
from __future__ import annotations

import math
import time
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import _kernels as K
from ..conformal import PredictionRegions
from ..dynamics import (ModelParams, Trajectory, concatenate, connect, distances_from,
                        distances_to, prefix, single_state, steer)
from ..env import PlanningProblem, World, in_goal
from .sampling import Sampler, SamplerConfig
from .tree import Tree


@dataclass(frozen=True)
class PlannerConfig:
    n_iters: int = 20_000
    seed: int = 0
    stop_at_first: bool = False
    gamma: Optional[float] = None
    dimension: Optional[int] = None
    resolution: float = 0.25
    # non-holonomic Nearest: model-distance argmin over this many Euclidean
    # nearest nodes; 0 searches the whole tree exactly
    nearest_candidates: int = 8
    # end an extension at its first state inside the goal disc
    stop_edges_at_goal: bool = True
    check_invariants: bool = False

    def __post_init__(self):
        if self.n_iters < 1:
            raise ValueError("n_iters must be >= 1")


@dataclass
class PlanStats:
    iterations: int = 0
    iters_to_first: Optional[int] = None
    time_to_first: Optional[float] = None
    first_cost: Optional[float] = None
    wall_time: float = 0.0
    nodes: int = 1
    fallbacks: int = 0
    rewires: int = 0
    gamma: float = 0.0


@dataclass
class PlanResult:
    tree: Tree
    best: Optional[Trajectory]
    stats: PlanStats
    goal_nodes: list[int] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.best is not None


def _unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@lru_cache(maxsize=256)
def free_area(world: World, n: int = 20_000, seed: int = 0) -> float:
    """Monte-Carlo estimate of the free area (fixed seed, so deterministic; cached per world)."""
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = world.bounds
    pts = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
    frac = K.points_free(pts, world.rects, world.bounds_arr).mean()
    return float(frac) * world.width * world.height


def rrt_star_gamma(world: World, params: ModelParams, d: Optional[int] = None) -> float:
    """``2 (1 + 1/d)^(1/d) (mu(X_free) / zeta_d)^(1/d)`` for the model's state space."""
    d = params.dim if d is None else d
    mu = free_area(world) * (params.extra_measure() if d > 2 else 1.0)
    return 2.0 * (1.0 + 1.0 / d) ** (1.0 / d) * (mu / _unit_ball_volume(d)) ** (1.0 / d)


def trajectory_free(world: World, traj: Trajectory, resolution: float = 0.25) -> bool:
    pos = traj.positions
    if len(pos) == 2:
        return bool(K.segment_free(pos[0, 0], pos[0, 1], pos[1, 0], pos[1, 1], resolution,
                                   world.rects, world.bounds_arr))
    return bool(K.polyline_free(pos, resolution, world.rects, world.bounds_arr))


def _nearest(tree: Tree, params: ModelParams, x: np.ndarray, n_cand: int) -> int:
    """Node minimising the model distance to ``x``; ties go to the lowest node id.

    With ``n_cand > 0`` the minimum is taken over the ``n_cand`` Euclidean
    nearest nodes. With ``n_cand == 0`` it is exact: every model distance is
    at least the planar one, so a radius query at the best distance seen
    among a few Euclidean neighbours holds the minimiser.
    """
    if params.model == "holonomic":
        return tree.index.nearest(x[0], x[1])
    cand = tree.index.knn(x[0], x[1], n_cand if n_cand > 0 else 8)
    d = distances_from(params, tree.states[cand], x)
    best = float(d.min())
    if n_cand <= 0 and len(cand) < tree.size:
        last = tree.states[cand[-1]]
        if math.hypot(last[0] - x[0], last[1] - x[1]) <= best:
            # slack so float rounding in the squared-radius test cannot drop the minimiser
            cand = tree.index.radius(x[0], x[1], best * (1.0 + 1e-9) + 1e-12)
            d = distances_from(params, tree.states[cand], x)
            best = float(d.min())
    return int(cand[d == best].min())


def _goal_entry(problem: PlanningProblem, a: np.ndarray, b: np.ndarray) -> Optional[np.ndarray]:
    """A point of segment ``a``-``b`` strictly inside the goal disc, or None.

    Used when ``b`` itself is outside: the midpoint of the chord the segment
    cuts from the disc.
    """
    cx, cy = problem.goal_center
    r = problem.goal_radius
    dx, dy = b[0] - a[0], b[1] - a[1]
    fx, fy = a[0] - cx, a[1] - cy
    qa = dx * dx + dy * dy
    qb = 2.0 * (fx * dx + fy * dy)
    qc = fx * fx + fy * fy - r * r
    disc = qb * qb - 4.0 * qa * qc
    if qa == 0.0 or disc <= 0.0:
        return None
    root = math.sqrt(disc)
    t0 = max((-qb - root) / (2.0 * qa), 0.0)
    t1 = min((-qb + root) / (2.0 * qa), 1.0)
    if t0 >= t1:
        return None
    t = 0.5 * (t0 + t1)
    p = np.array([a[0] + t * dx, a[1] + t * dy])
    return p if in_goal(problem, p) else None


def extract_solution(tree: Tree, problem: PlanningProblem,
                     goal_nodes: Optional[list[int]] = None) -> Optional[Trajectory]:
    """Cheapest root-to-goal path, as the concatenation of the incoming edges."""
    if goal_nodes is None:
        pos = tree.view_states()[:, :2]
        gx, gy = problem.goal_center
        goal_nodes = np.nonzero(np.hypot(pos[:, 0] - gx, pos[:, 1] - gy) <= problem.goal_radius)[0]
    if len(goal_nodes) == 0:
        return None
    costs = tree.cost[np.asarray(goal_nodes)]
    node = int(np.asarray(goal_nodes)[int(np.argmin(costs))])
    chain = tree.path_to(node)
    if len(chain) == 1:
        return single_state(tree.model, tree.states[0])
    return concatenate([tree.edge(i) for i in chain[1:]])


def plan(problem: PlanningProblem, model: ModelParams, sampler: SamplerConfig,
         pc: PlannerConfig, regions: Optional[PredictionRegions] = None) -> PlanResult:
    """Run RRT* for ``pc.n_iters`` iterations (or until the first solution).

    Each iteration samples, steers from the nearest node, and, when the
    steered trajectory is collision free, picks the cheapest collision-free
    parent among the near nodes and rewires those neighbours whose cost drops
    through the new node.
    """
    t_start = time.perf_counter()
    if (sampler.kind == "cp") != (regions is not None):
        raise ValueError("prediction regions are required iff the sampler kind is 'cp'")
    world = problem.world
    root = model.initial_state(problem.start)
    tree = Tree(root, model.model)
    smp = Sampler(problem, model, sampler, pc.seed, regions)
    d = pc.dimension or model.dim
    gamma = pc.gamma if pc.gamma is not None else rrt_star_gamma(world, model, d)
    stats = PlanStats(gamma=gamma)
    goal_nodes: list[int] = []
    if in_goal(problem, root):
        goal_nodes.append(0)
        stats.iters_to_first = 0
        stats.time_to_first = time.perf_counter() - t_start
        stats.first_cost = 0.0
    res = pc.resolution
    eta = model.eta
    holo = model.model == "holonomic"
    stop_at_goal = pc.stop_edges_at_goal
    inv_d = 1.0 / d

    for j in range(1, pc.n_iters + 1):
        stats.iterations = j
        x_rand = smp.draw()
        i_near = _nearest(tree, model, x_rand, pc.nearest_candidates)
        if holo:
            # straight-line steer; the edge object is only built once the node is kept
            a = tree.states[i_near]
            dist = math.hypot(x_rand[0] - a[0], x_rand[1] - a[1])
            if dist <= 0.0:
                continue
            x_new = x_rand if dist <= eta else a + (x_rand - a) * (eta / dist)
            traj = None
            traj_len = min(dist, eta)
            # truncate before the collision check: only the kept part must be free
            if stop_at_goal and not in_goal(problem, x_new):
                entry = _goal_entry(problem, a, x_new)
                if entry is not None:
                    x_new = entry
                    traj_len = math.hypot(entry[0] - a[0], entry[1] - a[1])
            if not K.segment_free(a[0], a[1], x_new[0], x_new[1], res, world.rects,
                                  world.bounds_arr):
                continue
        else:
            traj = steer(model, tree.states[i_near], x_rand)
            if traj is None or len(traj) < 2 or traj.length <= 0.0:
                continue
            if stop_at_goal and not in_goal(problem, traj.end):
                pos = traj.positions[1:]
                inside = np.hypot(pos[:, 0] - problem.goal_center[0],
                                  pos[:, 1] - problem.goal_center[1]) <= problem.goal_radius
                if inside.any():
                    traj = prefix(model, traj, int(np.argmax(inside)) + 1)
            if not trajectory_free(world, traj, res):
                continue
            x_new = traj.end
            traj_len = traj.length

        n = tree.size + 1
        r_n = min(gamma * (math.log(n) / n) ** inv_d, eta)
        near = tree.index.radius(x_new[0], x_new[1], r_n)

        best_parent, best_traj = i_near, traj
        best_cost = tree.cost[i_near] + traj_len
        if len(near) and holo:
            # straight edges: the estimate is the exact cost, so only the
            # collision check remains and the edge is built for the winner
            cand, c = K.straight_choose_parent(near, tree.cost, tree.states, x_new[0], x_new[1],
                                               i_near, best_cost, res, world.rects,
                                               world.bounds_arr)
            if cand >= 0:
                best_parent, best_cost, best_traj = int(cand), float(c), None
        elif len(near):
            est = tree.cost[near] + distances_from(model, tree.states[near], x_new)
            for idx in np.argsort(est, kind="stable"):
                if est[idx] >= best_cost:
                    break
                cand = int(near[idx])
                if cand == i_near:
                    continue
                t2 = connect(model, tree.states[cand], x_new)
                if t2 is None:
                    continue
                c2 = tree.cost[cand] + t2.length
                if c2 < best_cost and trajectory_free(world, t2, res):
                    best_parent, best_traj, best_cost = cand, t2, c2
        # holonomic edges stay implicit (None) until a solution is extracted
        if not holo:
            x_new = best_traj.end
        new = tree.add(x_new, best_parent, best_traj, best_cost)
        if in_goal(problem, x_new):
            goal_nodes.append(new)
            if stats.iters_to_first is None:
                stats.iters_to_first = j
                stats.time_to_first = time.perf_counter() - t_start
                stats.first_cost = float(best_cost)
                if pc.stop_at_first:
                    break

        if len(near) and holo:
            x_new = tree.states[new]
            for c in K.straight_rewire_candidates(near, best_parent, tree.cost, tree.states,
                                                  x_new[0], x_new[1], best_cost, res,
                                                  world.rects, world.bounds_arr):
                c = int(c)
                b = tree.states[c]
                nc = best_cost + math.hypot(b[0] - x_new[0], b[1] - x_new[1])
                # an earlier rewire may already have lowered this node's cost
                if nc < tree.cost[c] - 1e-9:
                    tree.rewire(c, new, None, nc)
                    stats.rewires += 1
        elif len(near):
            x_new = tree.states[new]
            cand = near[near != best_parent]
            if len(cand):
                dist = distances_to(model, x_new, tree.states[cand])
                improving = cand[best_cost + dist < tree.cost[cand] - 1e-9]
                for c in improving:
                    c = int(c)
                    t3 = connect(model, x_new, tree.states[c])
                    if t3 is None:
                        continue
                    nc = best_cost + t3.length
                    if nc < tree.cost[c] - 1e-9 and trajectory_free(world, t3, res):
                        tree.rewire(c, new, t3, nc)
                        stats.rewires += 1
        if pc.check_invariants:
            tree.check_invariants()

    stats.wall_time = time.perf_counter() - t_start
    stats.nodes = tree.size
    stats.fallbacks = smp.fallbacks
    best = extract_solution(tree, problem, goal_nodes)
    return PlanResult(tree, best, stats, goal_nodes)
