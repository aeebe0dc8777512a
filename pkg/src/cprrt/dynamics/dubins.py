"""Shortest Dubins paths via the closed-form six-word solution.

Words are indexed in the fixed order ``LSL, LSR, RSL, RSR, RLR, LRL``.
Segment directions are +1 (left), 0 (straight), -1 (right). Lengths inside
the normalized solver are in units of the turning radius.
"""
import math

import numpy as np
from numba import njit

WORDS = ("LSL", "LSR", "RSL", "RSR", "RLR", "LRL")
SEGMENT_DIRS = np.array([[1, 0, 1], [1, 0, -1], [-1, 0, 1], [-1, 0, -1],
                         [-1, 1, -1], [1, -1, 1]], dtype=np.int64)

TWO_PI = 2.0 * math.pi
# Rounding slack at tangent configurations. The tail of an optimal path starts
# exactly on such a configuration, where an arc of 0 must not come out as 2*pi.
ARC_EPS = 1e-9
RAD_EPS = 1e-12


@njit(cache=True)
def mod2pi(x):
    return x - TWO_PI * math.floor(x / TWO_PI)


@njit(cache=True)
def wrap_angle(x):
    """Wrap to [-pi, pi)."""
    return mod2pi(x + math.pi) - math.pi


@njit(cache=True)
def _arc(x):
    a = mod2pi(x)
    return 0.0 if a > TWO_PI - ARC_EPS else a


@njit(cache=True)
def normalized_words(alpha, beta, d):
    """(t, p, q) for each of the six words; rows of inf where infeasible."""
    out = np.full((6, 3), np.inf)
    sa = math.sin(alpha)
    sb = math.sin(beta)
    ca = math.cos(alpha)
    cb = math.cos(beta)
    cab = math.cos(alpha - beta)
    dd = d * d

    # LSL
    p2 = 2.0 + dd - 2.0 * cab + 2.0 * d * (sa - sb)
    if p2 >= -RAD_EPS:
        tmp = math.atan2(cb - ca, d + sa - sb)
        out[0, 0] = _arc(tmp - alpha)
        out[0, 1] = math.sqrt(max(p2, 0.0))
        out[0, 2] = _arc(beta - tmp)
    # LSR
    p2 = -2.0 + dd + 2.0 * cab + 2.0 * d * (sa + sb)
    if p2 >= -RAD_EPS:
        p = math.sqrt(max(p2, 0.0))
        tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
        out[1, 0] = _arc(tmp - alpha)
        out[1, 1] = p
        out[1, 2] = _arc(tmp - beta)
    # RSL
    p2 = dd - 2.0 + 2.0 * cab - 2.0 * d * (sa + sb)
    if p2 >= -RAD_EPS:
        p = math.sqrt(max(p2, 0.0))
        tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
        out[2, 0] = _arc(alpha - tmp)
        out[2, 1] = p
        out[2, 2] = _arc(beta - tmp)
    # RSR
    p2 = 2.0 + dd - 2.0 * cab + 2.0 * d * (sb - sa)
    if p2 >= -RAD_EPS:
        tmp = math.atan2(ca - cb, d - sa + sb)
        out[3, 0] = _arc(alpha - tmp)
        out[3, 1] = math.sqrt(max(p2, 0.0))
        out[3, 2] = _arc(tmp - beta)
    # RLR
    tmp = (6.0 - dd + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0
    if abs(tmp) <= 1.0 + RAD_EPS:
        p = mod2pi(TWO_PI - math.acos(min(1.0, max(-1.0, tmp))))
        t = _arc(alpha - math.atan2(ca - cb, d - sa + sb) + p / 2.0)
        out[4, 0] = t
        out[4, 1] = p
        out[4, 2] = _arc(alpha - beta - t + p)
    # LRL
    tmp = (6.0 - dd + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0
    if abs(tmp) <= 1.0 + RAD_EPS:
        p = mod2pi(TWO_PI - math.acos(min(1.0, max(-1.0, tmp))))
        t = _arc(-alpha - math.atan2(ca - cb, d + sa - sb) + p / 2.0)
        out[5, 0] = t
        out[5, 1] = p
        out[5, 2] = _arc(beta - alpha - t + p)
    return out


@njit(cache=True)
def _frame(x0, y0, th0, x1, y1, th1, rho):
    dx = x1 - x0
    dy = y1 - y0
    d = math.sqrt(dx * dx + dy * dy) / rho
    phi = math.atan2(dy, dx) if d > 0.0 else 0.0
    return mod2pi(th0 - phi), mod2pi(th1 - phi), d


@njit(cache=True)
def shortest_word(x0, y0, th0, x1, y1, th1, rho):
    """Index of the shortest word and its (t, p, q) segment lengths in meters."""
    alpha, beta, d = _frame(x0, y0, th0, x1, y1, th1, rho)
    words = normalized_words(alpha, beta, d)
    best = 0
    best_len = np.inf
    for i in range(6):
        total = words[i, 0] + words[i, 1] + words[i, 2]
        if total < best_len:
            best_len = total
            best = i
    return best, words[best] * rho


@njit(cache=True)
def dubins_length(x0, y0, th0, x1, y1, th1, rho):
    _, seg = shortest_word(x0, y0, th0, x1, y1, th1, rho)
    return seg[0] + seg[1] + seg[2]


@njit(cache=True)
def lengths_from_many(states, x1, y1, th1, rho):
    out = np.empty(states.shape[0])
    for i in range(states.shape[0]):
        out[i] = dubins_length(states[i, 0], states[i, 1], states[i, 2], x1, y1, th1, rho)
    return out


@njit(cache=True)
def lengths_to_many(x0, y0, th0, states, rho):
    out = np.empty(states.shape[0])
    for i in range(states.shape[0]):
        out[i] = dubins_length(x0, y0, th0, states[i, 0], states[i, 1], states[i, 2], rho)
    return out


@njit(cache=True)
def advance(x, y, th, curvature, ds):
    if curvature == 0.0:
        return x + ds * math.cos(th), y + ds * math.sin(th), th
    th1 = th + curvature * ds
    return (x + (math.sin(th1) - math.sin(th)) / curvature,
            y - (math.cos(th1) - math.cos(th)) / curvature,
            th1)


@njit(cache=True)
def sample_word(x0, y0, th0, dirs, seg, rho, s_values):
    """Poses at arc lengths ``s_values`` (ascending) along a word from a start pose."""
    out = np.empty((s_values.shape[0], 3))
    bx = np.empty(4)
    by = np.empty(4)
    bt = np.empty(4)
    bs = np.empty(4)
    bx[0] = x0
    by[0] = y0
    bt[0] = th0
    bs[0] = 0.0
    for j in range(3):
        bx[j + 1], by[j + 1], bt[j + 1] = advance(bx[j], by[j], bt[j], dirs[j] / rho, seg[j])
        bs[j + 1] = bs[j] + seg[j]
    for i in range(s_values.shape[0]):
        s = s_values[i]
        j = 0
        while j < 2 and s > bs[j + 1]:
            j += 1
        x, y, t = advance(bx[j], by[j], bt[j], dirs[j] / rho, s - bs[j])
        out[i, 0] = x
        out[i, 1] = y
        out[i, 2] = wrap_angle(t)
    return out
