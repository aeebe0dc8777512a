"""Robot models, trajectories and the local steering primitives.

States are plain float arrays whose layout is fixed by the model tag:

* ``holonomic``: ``(x, y)``
* ``dubins``: ``(x, y, theta)``
* ``car5d``: ``(x, y, theta, v, kappa)``

A :class:`Trajectory` stores its states together with a piecewise-constant
control record: each row is ``(u..., duration)`` and the rows, applied in
order from ``states[0]``, regenerate the trajectory. For the holonomic robot
and the Dubins car the duration is arc length (unit speed); for the 5-D car it
is time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import dubins as D
from .lqr import lqr_rollout

MODELS = ("holonomic", "dubins", "car5d")
STATE_DIMS = {"holonomic": 2, "dubins": 3, "car5d": 5}


@dataclass(frozen=True)
class ModelParams:
    model: str = "holonomic"
    eta: float = 5.0
    kappa_max: float = 0.2
    v_max: float = 5.0
    u_v_max: float = 2.0
    u_kappa_max: float = 0.5
    spacing: float = 0.25
    dt: float = 0.05
    theta_weight: float = 2.0
    # car5d connections (ChooseParent / Rewire) accept this terminal mismatch
    connect_tol: float = 0.25

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        for name in ("eta", "kappa_max", "v_max", "u_v_max", "u_kappa_max", "spacing", "dt"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def dim(self) -> int:
        return STATE_DIMS[self.model]

    @property
    def rho(self) -> float:
        return 1.0 / self.kappa_max

    def initial_state(self, position: Sequence[float]) -> np.ndarray:
        x = np.zeros(self.dim)
        x[:2] = position[:2]
        return x

    def extra_dims(self):
        """(low, high) ranges of the non-positional state components."""
        if self.model == "dubins":
            return [(-math.pi, math.pi)]
        if self.model == "car5d":
            return [(-math.pi, math.pi), (0.0, self.v_max), (-self.kappa_max, self.kappa_max)]
        return []

    def extra_measure(self) -> float:
        m = 1.0
        for lo, hi in self.extra_dims():
            m *= hi - lo
        return m


@dataclass
class Trajectory:
    model: str
    states: np.ndarray
    controls: np.ndarray
    length: float
    positions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.ndim != 2 or self.states.shape[1] != STATE_DIMS[self.model]:
            raise ValueError("states must be (n, dim) for the model")
        self.positions = np.ascontiguousarray(self.states[:, :2])

    @property
    def start(self) -> np.ndarray:
        return self.states[0]

    @property
    def end(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self):
        return len(self.states)


def single_state(model: str, x: np.ndarray) -> Trajectory:
    dim = STATE_DIMS[model]
    return Trajectory(model, np.asarray(x, dtype=np.float64).reshape(1, dim),
                      np.zeros((0, 3 if model != "dubins" else 2)), 0.0)


def trajectory_cost(t: Trajectory) -> float:
    return float(t.length)


def _line(params: ModelParams, a: np.ndarray, b: np.ndarray, dist: float) -> Trajectory:
    states = np.empty((2, 2))
    states[0] = a
    states[1] = b
    ctrl = np.empty((1, 3))
    ctrl[0, 0] = (b[0] - a[0]) / dist
    ctrl[0, 1] = (b[1] - a[1]) / dist
    ctrl[0, 2] = dist
    return Trajectory("holonomic", states, ctrl, dist)


def _dubins_traj(params: ModelParams, a: np.ndarray, word: int, seg: np.ndarray,
                 max_len: float) -> Trajectory:
    total = float(seg.sum())
    length = min(total, max_len)
    n = max(1, int(math.ceil(length / params.spacing - 1e-12)))
    s = np.linspace(0.0, length, n + 1)
    dirs = D.SEGMENT_DIRS[word]
    states = D.sample_word(float(a[0]), float(a[1]), float(a[2]), dirs, seg, params.rho, s)
    states[0] = a
    controls = []
    remaining = length
    for j in range(3):
        ds = min(float(seg[j]), remaining)
        if ds > 0:
            controls.append((dirs[j] * params.kappa_max, ds))
        remaining -= ds
    return Trajectory("dubins", states, np.array(controls).reshape(-1, 2), length)


def dubins_shortest_path(q0: Sequence[float], q1: Sequence[float], kappa_max: float,
                         spacing: float = 0.25) -> Trajectory:
    if kappa_max <= 0:
        raise ValueError("kappa_max must be positive")
    params = ModelParams("dubins", kappa_max=kappa_max, spacing=spacing)
    a = np.asarray(q0, dtype=np.float64)
    word, seg = D.shortest_word(a[0], a[1], a[2], q1[0], q1[1], q1[2], params.rho)
    return _dubins_traj(params, a, word, seg, np.inf)


def distance(params: ModelParams, a: np.ndarray, b: np.ndarray) -> float:
    if params.model == "holonomic":
        return math.hypot(b[0] - a[0], b[1] - a[1])
    if params.model == "dubins":
        return float(D.dubins_length(a[0], a[1], a[2], b[0], b[1], b[2], params.rho))
    dth = float(D.wrap_angle(b[2] - a[2]))
    return math.sqrt((b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2 + (params.theta_weight * dth) ** 2)


def distances_from(params: ModelParams, states: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``distance(params, states[i], b)`` for every row."""
    if params.model == "holonomic":
        return np.hypot(states[:, 0] - b[0], states[:, 1] - b[1])
    if params.model == "dubins":
        return D.lengths_from_many(np.ascontiguousarray(states), b[0], b[1], b[2], params.rho)
    dth = (b[2] - states[:, 2] + math.pi) % (2 * math.pi) - math.pi
    return np.sqrt((b[0] - states[:, 0]) ** 2 + (b[1] - states[:, 1]) ** 2
                   + (params.theta_weight * dth) ** 2)


def distances_to(params: ModelParams, a: np.ndarray, states: np.ndarray) -> np.ndarray:
    """``distance(params, a, states[i])`` for every row."""
    if params.model == "dubins":
        return D.lengths_to_many(a[0], a[1], a[2], np.ascontiguousarray(states), params.rho)
    return distances_from(params, states, a)


def steer(params: ModelParams, start: np.ndarray, toward: np.ndarray) -> Optional[Trajectory]:
    """Feasible trajectory from ``start`` of length <= eta that approaches ``toward``.

    Returns the single-state trajectory when ``start`` equals ``toward`` and
    ``None`` when the 5-D car's LQR rollout fails to get closer.
    """
    start = np.asarray(start, dtype=np.float64)
    toward = np.asarray(toward, dtype=np.float64)
    if start.shape == toward.shape and (start == toward).all():
        return single_state(params.model, start)
    if params.model == "holonomic":
        dist = math.hypot(toward[0] - start[0], toward[1] - start[1])
        if dist > params.eta:
            toward = start + (toward - start) * (params.eta / dist)
            dist = params.eta
        return _line(params, start, toward, dist)
    if params.model == "dubins":
        word, seg = D.shortest_word(start[0], start[1], start[2],
                                    toward[0], toward[1], toward[2], params.rho)
        if seg.sum() == 0.0:
            return single_state(params.model, start)
        return _dubins_traj(params, start, word, seg, params.eta)
    states, controls, length = lqr_rollout(start, toward, params, params.eta)
    if len(states) < 2 or distance(params, states[-1], toward) >= distance(params, start, toward):
        return None
    return Trajectory("car5d", states, controls, length)


def prefix(params: ModelParams, traj: Trajectory, i: int) -> Trajectory:
    """The part of ``traj`` up to its stored state ``i`` (a feasible trajectory itself)."""
    if not 1 <= i < len(traj):
        raise ValueError("prefix index must lie in [1, len(traj))")
    states = traj.states[: i + 1]
    if traj.model == "holonomic":
        return _line(params, states[0], states[-1],
                     math.hypot(states[-1, 0] - states[0, 0], states[-1, 1] - states[0, 1]))
    if traj.model == "dubins":
        # samples are evenly spaced in arc length
        length = traj.length * i / (len(traj) - 1)
        rows, left = [], length
        for kappa, ds in traj.controls:
            if left <= 0.0:
                break
            rows.append((kappa, min(ds, left)))
            left -= ds
        return Trajectory("dubins", states, np.array(rows).reshape(-1, 2), length)
    controls = traj.controls[:i]
    v = traj.states[:i, 3]
    length = float(np.sum(controls[:, 2] * (v + 0.5 * controls[:, 0] * controls[:, 2])))
    return Trajectory("car5d", states, controls, length)


def connect(params: ModelParams, a: np.ndarray, b: np.ndarray) -> Optional[Trajectory]:
    """Trajectory from ``a`` ending at ``b`` (RRT* ChooseParent / Rewire edges).

    Exact for the holonomic robot and the Dubins car. The 5-D car uses an LQR
    rollout with no length cap and accepts it when the terminal weighted
    distance to ``b`` is within ``params.connect_tol``; the last stored state
    is then the one actually reached.
    """
    if params.model == "holonomic":
        dist = math.hypot(b[0] - a[0], b[1] - a[1])
        if dist == 0.0:
            return None
        return _line(params, a, b, dist)
    if params.model == "dubins":
        word, seg = D.shortest_word(a[0], a[1], a[2], b[0], b[1], b[2], params.rho)
        if seg.sum() == 0.0:
            return None
        return _dubins_traj(params, a, word, seg, np.inf)
    reach = 2.0 * params.eta
    states, controls, length = lqr_rollout(a, b, params, reach)
    if len(states) < 2 or distance(params, states[-1], b) > params.connect_tol:
        return None
    return Trajectory("car5d", states, controls, length)


def concatenate(trajs: Sequence[Trajectory]) -> Trajectory:
    """Join consecutive edges; each edge's first state duplicates the previous end."""
    trajs = list(trajs)
    if not trajs:
        raise ValueError("nothing to concatenate")
    states = [trajs[0].states]
    controls = [trajs[0].controls]
    for t in trajs[1:]:
        states.append(t.states[1:])
        controls.append(t.controls)
    return Trajectory(trajs[0].model, np.vstack(states), np.vstack(controls),
                      float(sum(t.length for t in trajs)))


def densify(t: Trajectory, spacing: float = 0.25) -> Trajectory:
    """Insert linearly interpolated states so consecutive positions are <= spacing apart.

    Only straight-line (holonomic) segments are refined exactly; curved models
    are already stored at the requested spacing.
    """
    if len(t.states) < 2:
        return t
    out = [t.states[:1]]
    for a, b in zip(t.states[:-1], t.states[1:]):
        gap = math.hypot(b[0] - a[0], b[1] - a[1])
        n = max(1, int(math.ceil(gap / spacing - 1e-12)))
        if n > 1:
            s = np.linspace(0.0, 1.0, n + 1)[1:, None]
            out.append(a + s * (b - a))
        else:
            out.append(b[None, :])
    return Trajectory(t.model, np.vstack(out), t.controls, t.length)


def trajectory_to_dict(t: Trajectory) -> dict:
    return {"model": t.model, "states": t.states.tolist(), "length": t.length}


def trajectory_from_dict(d: dict) -> Trajectory:
    states = np.asarray(d["states"], dtype=np.float64)
    ctl_width = 2 if d["model"] == "dubins" else 3
    controls = np.asarray(d.get("controls", np.zeros((0, ctl_width))), dtype=np.float64)
    return Trajectory(d["model"], states, controls.reshape(-1, ctl_width), float(d["length"]))
