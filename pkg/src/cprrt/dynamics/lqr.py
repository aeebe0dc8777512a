"""LQR tracking of a straight-line reference for the 5-D kinematic car.

State ``(x, y, theta, v, kappa)``, control ``(u_v, u_kappa)``, dynamics
``[v cos(theta), v sin(theta), v kappa, u_v, u_kappa]``. The controller is
designed on the error dynamics linearized about a constant-speed straight
reference and simulated on the nonlinear model with clamped controls.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .dubins import wrap_angle

RICCATI_TOL = 1e-9


def car_rhs(state: np.ndarray, u: np.ndarray) -> np.ndarray:
    _, _, th, v, k = state
    return np.array([v * math.cos(th), v * math.sin(th), v * k, u[0], u[1]])


def rk4_step(state: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    k1 = car_rhs(state, u)
    k2 = car_rhs(state + 0.5 * h * k1, u)
    k3 = car_rhs(state + 0.5 * h * k2, u)
    k4 = car_rhs(state + h * k3, u)
    return state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def solve_dare(A, B, Q, R, tol=RICCATI_TOL, max_iter=100_000):
    """Iterate the discrete Riccati recursion to a fixed point; returns (P, K)."""
    P = Q.copy()
    for _ in range(max_iter):
        BtP = B.T @ P
        K = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = Q + A.T @ P @ (A - B @ K)
        if np.max(np.abs(P_next - P)) < tol:
            P = P_next
            break
        P = P_next
    else:
        raise RuntimeError("Riccati recursion did not converge")
    BtP = B.T @ P
    K = np.linalg.solve(R + BtP @ B, BtP @ A)
    return P, K


@lru_cache(maxsize=16)
def tracking_gain(v_ref: float, dt: float) -> np.ndarray:
    """Gain on the error ``[along, cross, heading, speed, curvature]``."""
    Ac = np.zeros((5, 5))
    Ac[0, 3] = 1.0
    Ac[1, 2] = v_ref
    Ac[2, 4] = v_ref
    Bc = np.zeros((5, 2))
    Bc[3, 0] = 1.0
    Bc[4, 1] = 1.0
    # zero-order-hold discretization
    M = np.zeros((7, 7))
    M[:5, :5] = Ac
    M[:5, 5:] = Bc
    Md = expm(M * dt)
    A, B = Md[:5, :5], Md[:5, 5:]
    _, K = solve_dare(A, B, np.eye(5), np.eye(2))
    K.setflags(write=False)
    return K


def lqr_rollout(start: np.ndarray, target_xy, params, max_length: float):
    """Track the line from ``start`` toward ``target_xy`` until ``max_length`` arc.

    Returns ``(states, controls, length)``; controls rows are
    ``(u_v, u_kappa, duration)``. The rollout also stops once the vehicle has
    passed the target along the line, or when the speed stalls at zero.
    """
    dt = params.dt
    v_ref = 0.5 * params.v_max
    x0 = np.asarray(start, dtype=np.float64)
    dx, dy = target_xy[0] - x0[0], target_xy[1] - x0[1]
    span = math.hypot(dx, dy)
    psi = math.atan2(dy, dx) if span > 1e-12 else float(x0[2])
    c, s = math.cos(psi), math.sin(psi)
    K = tracking_gain(v_ref, dt)

    states = [x0.copy()]
    controls = []
    length = 0.0
    x = x0.copy()
    t = 0.0
    max_steps = int(math.ceil(4.0 * max_length / (v_ref * dt))) + 200
    for _ in range(max_steps):
        rel_x, rel_y = x[0] - x0[0], x[1] - x0[1]
        along = c * rel_x + s * rel_y
        if along >= span:
            break
        ref_along = min(v_ref * (t + dt), span)
        err = np.array([
            along - ref_along,
            -s * rel_x + c * rel_y,
            wrap_angle(x[2] - psi),
            x[3] - v_ref,
            x[4],
        ])
        u = -K @ err
        u[0] = min(max(u[0], -params.u_v_max), params.u_v_max)
        u[1] = min(max(u[1], -params.u_kappa_max), params.u_kappa_max)
        # keep v in [0, v_max] and |kappa| <= kappa_max at the end of the step
        u[0] = min(max(u[0], -x[3] / dt), (params.v_max - x[3]) / dt)
        u[1] = min(max(u[1], (-params.kappa_max - x[4]) / dt), (params.kappa_max - x[4]) / dt)
        nxt = rk4_step(x, u, dt)
        # arc length increment: v is affine in time over the step
        step_len = dt * (x[3] + 0.5 * u[0] * dt)
        if length + step_len > max_length + 1e-12:
            break
        nxt[2] = wrap_angle(nxt[2])
        nxt[3] = min(max(nxt[3], 0.0), params.v_max)
        nxt[4] = min(max(nxt[4], -params.kappa_max), params.kappa_max)
        length += step_len
        t += dt
        controls.append((u[0], u[1], dt))
        states.append(nxt)
        x = nxt
        if x[3] <= 1e-9 and u[0] <= 0.0 and t > 1.0:
            break
    return np.array(states), np.array(controls, dtype=np.float64).reshape(-1, 3), length
