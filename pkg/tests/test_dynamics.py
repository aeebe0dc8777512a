import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cprrt.dynamics import (ModelParams, Trajectory, concatenate, connect, densify, distance,
                            distances_from, distances_to, dubins_shortest_path, prefix,
                            single_state,
                            steer, trajectory_cost, trajectory_from_dict, trajectory_to_dict)
from cprrt.dynamics import dubins as D
from cprrt.dynamics.lqr import solve_dare
from oracles import dubins_candidates, integrate_car, integrate_unicycle, wrap

HOLO = ModelParams("holonomic")
DUB = ModelParams("dubins")
CAR = ModelParams("car5d")

angles = st.floats(-math.pi, math.pi, exclude_max=True)
coords = st.floats(-30, 30)


def random_pairs(n, seed=0, spread=30.0):
    rng = np.random.default_rng(seed)
    q0 = np.column_stack([rng.uniform(-spread, spread, (n, 2)), rng.uniform(-math.pi, math.pi, n)])
    q1 = np.column_stack([rng.uniform(-spread, spread, (n, 2)), rng.uniform(-math.pi, math.pi, n)])
    return q0, q1


class TestParams:
    def test_rejects_unknown_model(self):
        with pytest.raises(ValueError):
            ModelParams("tank")

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            ModelParams("dubins", kappa_max=0.0)

    def test_defaults(self):
        assert DUB.rho == pytest.approx(5.0)
        assert CAR.dim == 5 and DUB.dim == 3 and HOLO.dim == 2


class TestSteer:
    def test_holonomic_truncated(self):
        t = steer(HOLO, np.array([0.0, 0.0]), np.array([10.0, 0.0]))
        np.testing.assert_allclose(t.end, [5.0, 0.0])
        assert t.length == pytest.approx(5.0)

    def test_holonomic_short_reaches_target(self):
        t = steer(HOLO, np.array([1.0, 1.0]), np.array([2.0, 3.0]))
        np.testing.assert_array_equal(t.end, [2.0, 3.0])

    def test_same_state_gives_single_state(self):
        x = np.array([3.0, 4.0, 0.5])
        t = steer(DUB, x, x.copy())
        assert len(t) == 1 and t.length == 0.0

    def test_dubins_collinear(self):
        t = steer(DUB, np.zeros(3), np.array([10.0, 0.0, 0.0]))
        np.testing.assert_allclose(t.end, [5.0, 0.0, 0.0], atol=1e-12)
        assert t.length == pytest.approx(5.0)

    def test_dubins_target_behind(self):
        start = np.zeros(3)
        target = np.array([-8.0, 1.0, math.pi])
        t = steer(DUB, start, target)
        end = integrate_unicycle(start, t.controls)
        np.testing.assert_allclose(end[:2], t.end[:2], atol=1e-6)
        assert distance(DUB, end, target) < distance(DUB, start, target)
        assert t.length <= DUB.eta + 1e-9

    @settings(max_examples=150, deadline=None)
    @given(coords, coords, angles, coords, coords, angles)
    def test_dubins_properties(self, x0, y0, t0, x1, y1, t1):
        a, b = np.array([x0, y0, t0]), np.array([x1, y1, t1])
        t = steer(DUB, a, b)
        if distance(DUB, a, b) == 0.0:
            assert len(t) == 1 and t.length == 0.0
            return
        assert t.length <= DUB.eta + 1e-9
        np.testing.assert_array_equal(t.start, a)
        assert distance(DUB, t.end, b) < distance(DUB, a, b)
        assert np.all(t.states[:, 2] >= -math.pi) and np.all(t.states[:, 2] < math.pi)
        steps = np.hypot(*np.diff(t.positions, axis=0).T)
        assert steps.max() <= DUB.spacing + 1e-9

    @settings(max_examples=150, deadline=None)
    @given(coords, coords, coords, coords)
    def test_holonomic_properties(self, x0, y0, x1, y1):
        a, b = np.array([x0, y0]), np.array([x1, y1])
        assume(not np.array_equal(a, b))
        t = steer(HOLO, a, b)
        assert t.length <= HOLO.eta + 1e-9
        np.testing.assert_array_equal(t.start, a)
        assert math.dist(t.end, b) < math.dist(a, b)
        # length is the positional displacement
        assert abs(t.length - np.hypot(*np.diff(t.positions, axis=0).T).sum()) <= 1e-9

    @pytest.mark.parametrize("seed", range(25))
    def test_car5d_properties(self, seed):
        rng = np.random.default_rng(seed)
        a = np.array([*rng.uniform(0, 50, 2), rng.uniform(-math.pi, math.pi),
                      rng.uniform(0, 5), rng.uniform(-0.2, 0.2)])
        b = np.array([*rng.uniform(0, 50, 2), rng.uniform(-math.pi, math.pi),
                      rng.uniform(0, 5), rng.uniform(-0.2, 0.2)])
        t = steer(CAR, a, b)
        if t is None:  # reported non-convergence is allowed
            return
        np.testing.assert_array_equal(t.start, a)
        assert t.length <= CAR.eta + 1e-9
        assert distance(CAR, t.end, b) < distance(CAR, a, b)
        s = t.states
        assert np.all(s[:, 3] >= -1e-9) and np.all(s[:, 3] <= CAR.v_max + 1e-9)
        assert np.all(np.abs(s[:, 4]) <= CAR.kappa_max + 1e-9)
        assert np.all(s[:, 2] >= -math.pi) and np.all(s[:, 2] < math.pi)
        c = t.controls
        assert np.all(np.abs(c[:, 0]) <= CAR.u_v_max + 1e-12)
        assert np.all(np.abs(c[:, 1]) <= CAR.u_kappa_max + 1e-12)
        # model consistency: re-integrating the control record reproduces the states
        ref = integrate_car(a, c)
        np.testing.assert_allclose(ref[:, :2], s[:, :2], atol=1e-3)
        np.testing.assert_allclose(wrap(ref[:, 2] - s[:, 2]), 0.0, atol=1e-3)
        np.testing.assert_allclose(ref[:, 3:], s[:, 3:], atol=1e-3)

    def test_car5d_makes_progress_straight_ahead(self):
        a = np.array([0.0, 0.0, 0.0, 2.5, 0.0])
        t = steer(CAR, a, np.array([20.0, 0.0, 0.0, 2.5, 0.0]))
        assert t is not None
        assert t.end[0] == pytest.approx(t.length, abs=1e-6)
        assert t.length == pytest.approx(CAR.eta, abs=0.3)


class TestDubinsPath:
    def test_aligned_collinear(self):
        t = dubins_shortest_path((0, 0, 0), (10, 0, 0), 0.2)
        assert t.length == pytest.approx(10.0, abs=1e-9)
        np.testing.assert_allclose(t.end, [10, 0, 0], atol=1e-9)

    @pytest.mark.parametrize("kappa", [0.05, 0.2, 1.0, 3.0])
    def test_half_turn_bound(self, kappa):
        t = dubins_shortest_path((0, 0, 0), (0, 0, math.pi), kappa)
        assert t.length >= math.pi / kappa - 1e-9

    def test_rejects_nonpositive_kappa(self):
        with pytest.raises(ValueError):
            dubins_shortest_path((0, 0, 0), (1, 1, 0), 0.0)

    def test_against_tangent_construction(self):
        q0s, q1s = random_pairs(1000, seed=3)
        rho = DUB.rho
        for q0, q1 in zip(q0s, q1s):
            t = dubins_shortest_path(q0, q1, DUB.kappa_max)
            cands = dubins_candidates(q0, q1, rho)
            flat = [v for vs in cands.values() for v in vs]
            assert all(t.length <= v + 1e-7 for v in flat)
            assert t.length == pytest.approx(min(flat), abs=1e-7)
            assert t.length >= math.dist(q0[:2], q1[:2]) - 1e-9
            assert math.dist(t.end[:2], q1[:2]) < 1e-6
            assert abs(wrap(t.end[2] - q1[2])) < 1e-6

    def test_every_word_lands_on_target(self):
        q0s, q1s = random_pairs(200, seed=4)
        rho = DUB.rho
        for q0, q1 in zip(q0s, q1s):
            alpha, beta, d = D._frame(*q0, *q1, rho)
            words = D.normalized_words(alpha, beta, d)
            for w in range(6):
                if not np.isfinite(words[w]).all():
                    continue
                seg = words[w] * rho
                s = np.array([seg.sum()])
                end = D.sample_word(q0[0], q0[1], q0[2], D.SEGMENT_DIRS[w], seg, rho, s)[-1]
                assert math.dist(end[:2], q1[:2]) < 1e-6
                assert abs(wrap(end[2] - q1[2])) < 1e-6

    def test_controls_reproduce_states(self):
        q0s, q1s = random_pairs(50, seed=5)
        for q0, q1 in zip(q0s, q1s):
            t = dubins_shortest_path(q0, q1, 0.2)
            end = integrate_unicycle(q0, t.controls)
            assert math.dist(end[:2], t.end[:2]) < 1e-3
            assert abs(wrap(end[2] - t.end[2])) < 1e-3

    @settings(max_examples=200, deadline=None)
    @given(coords, coords, angles, coords, coords, angles, angles, coords, coords)
    def test_rigid_motion_invariance(self, x0, y0, t0, x1, y1, t1, rot, dx, dy):
        c, s = math.cos(rot), math.sin(rot)

        def move(x, y, th):
            return (c * x - s * y + dx, s * x + c * y + dy, float(D.wrap_angle(th + rot)))
        a = dubins_shortest_path((x0, y0, t0), (x1, y1, t1), 0.2).length
        b = dubins_shortest_path(move(x0, y0, t0), move(x1, y1, t1), 0.2).length
        # degenerate configurations can flip between equal-length words
        assert a == pytest.approx(b, abs=1e-9 * max(1.0, a) * 1e3)

    @settings(max_examples=200, deadline=None)
    @given(coords, coords, angles, coords, coords, angles)
    def test_length_at_least_euclidean(self, x0, y0, t0, x1, y1, t1):
        L = dubins_shortest_path((x0, y0, t0), (x1, y1, t1), 0.2).length
        assert L >= math.hypot(x1 - x0, y1 - y0) - 1e-9


class TestDistance:
    def test_holonomic(self):
        assert distance(HOLO, np.array([0.0, 0.0]), np.array([3.0, 4.0])) == 5.0

    def test_dubins_collinear(self):
        assert distance(DUB, np.zeros(3), np.array([7.0, 0.0, 0.0])) == pytest.approx(7.0)

    def test_dubins_matches_path_and_is_asymmetric(self):
        q0s, q1s = random_pairs(100, seed=6)
        asym = 0
        for q0, q1 in zip(q0s, q1s):
            d = distance(DUB, q0, q1)
            assert d == pytest.approx(dubins_shortest_path(q0, q1, 0.2).length, abs=1e-12)
            asym += abs(d - distance(DUB, q1, q0)) > 1e-6
        assert asym > 0

    def test_car5d_weights(self):
        a = np.array([0.0, 0.0, 0.0, 1.0, 0.1])
        b = np.array([3.0, 4.0, 1.0, 4.0, -0.1])
        assert distance(CAR, a, b) == pytest.approx(math.sqrt(25 + 4))

    def test_car5d_angle_wraps(self):
        a = np.array([0.0, 0.0, math.pi - 0.1, 0, 0])
        b = np.array([0.0, 0.0, -math.pi + 0.1, 0, 0])
        assert distance(CAR, a, b) == pytest.approx(0.4)

    @pytest.mark.parametrize("params", [HOLO, DUB, CAR])
    def test_batched_versions(self, params):
        rng = np.random.default_rng(7)
        states = np.column_stack([rng.uniform(0, 20, (30, 2)),
                                  rng.uniform(-3, 3, (30, params.dim - 2))])
        x = states[0]
        np.testing.assert_allclose(distances_from(params, states, x),
                                   [distance(params, s, x) for s in states], atol=1e-12)
        np.testing.assert_allclose(distances_to(params, x, states),
                                   [distance(params, x, s) for s in states], atol=1e-12)


class TestConnect:
    def test_holonomic_exact(self):
        t = connect(HOLO, np.array([0.0, 0.0]), np.array([30.0, 40.0]))
        assert t.length == pytest.approx(50.0)
        np.testing.assert_array_equal(t.end, [30.0, 40.0])

    def test_dubins_exact(self):
        q0s, q1s = random_pairs(50, seed=8)
        for a, b in zip(q0s, q1s):
            t = connect(DUB, a, b)
            assert t.length == pytest.approx(distance(DUB, a, b))
            assert math.dist(t.end[:2], b[:2]) < 1e-6

    def test_car5d_within_tolerance(self):
        a = np.array([0.0, 0.0, 0.0, 2.5, 0.0])
        b = np.array([6.0, 0.5, 0.1, 2.5, 0.0])
        t = connect(CAR, a, b)
        assert t is not None
        assert distance(CAR, t.end, b) <= CAR.connect_tol


class TestCost:
    def test_single_state(self):
        assert trajectory_cost(single_state("dubins", np.zeros(3))) == 0.0

    def test_straight(self):
        t = connect(HOLO, np.array([0.0, 0.0]), np.array([5.0, 0.0]))
        assert trajectory_cost(t) == 5.0

    def test_additive_under_concatenation(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            a, b, c = (np.array([*rng.uniform(0, 40, 2), rng.uniform(-math.pi, math.pi)])
                       for _ in range(3))
            t1, t2 = connect(DUB, a, b), connect(DUB, b, c)
            joined = concatenate([t1, t2])
            assert trajectory_cost(joined) == pytest.approx(
                trajectory_cost(t1) + trajectory_cost(t2), abs=1e-9)
            assert len(joined) == len(t1) + len(t2) - 1


def test_densify_spacing():
    t = connect(HOLO, np.array([0.0, 0.0]), np.array([10.0, 0.3]))
    d = densify(t, 0.25)
    steps = np.hypot(*np.diff(d.positions, axis=0).T)
    assert steps.max() <= 0.25 + 1e-12
    np.testing.assert_array_equal(d.start, t.start)
    np.testing.assert_allclose(d.end, t.end, atol=1e-12)
    assert d.length == t.length


def test_trajectory_json_roundtrip():
    t = dubins_shortest_path((0, 0, 0), (10, 5, 1.0), 0.2)
    back = trajectory_from_dict(trajectory_to_dict(t))
    np.testing.assert_array_equal(back.states, t.states)
    assert back.model == "dubins" and back.length == t.length


def test_trajectory_rejects_wrong_width():
    with pytest.raises(ValueError):
        Trajectory("dubins", np.zeros((3, 2)), np.zeros((0, 2)), 0.0)


def test_riccati_solution_satisfies_dare():
    A = np.array([[1.0, 0.1], [0.0, 1.0]])
    B = np.array([[0.0], [0.1]])
    Q, R = np.eye(2), np.eye(1)
    P, _ = solve_dare(A, B, Q, R)
    K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    resid = A.T @ P @ A - P - A.T @ P @ B @ K + Q
    assert np.abs(resid).max() < 1e-7


class TestPrefix:
    def test_full_prefix_keeps_length(self):
        q0, q1 = random_pairs(50, seed=8, spread=10)
        for a, b in zip(q0, q1):
            t = steer(DUB, a, b)
            if len(t) < 3:
                continue
            assert prefix(DUB, t, len(t) - 1).length == pytest.approx(t.length, rel=1e-12)

    def test_dubins_prefix_reintegrates(self):
        q0, q1 = random_pairs(50, seed=9, spread=10)
        for a, b in zip(q0, q1):
            t = steer(DUB, a, b)
            if len(t) < 3:
                continue
            i = len(t) // 2
            p = prefix(DUB, t, i)
            np.testing.assert_array_equal(p.states, t.states[: i + 1])
            assert p.controls[:, 1].sum() == pytest.approx(p.length, abs=1e-9)
            end = integrate_unicycle(a, p.controls)
            np.testing.assert_allclose(end[:2], p.end[:2], atol=1e-6)

    def test_car5d_prefix_reintegrates(self):
        a = np.array([0.0, 0.0, 0.3, 1.0, 0.0])
        t = steer(CAR, a, np.array([5.0, 4.0, 0.0, 2.5, 0.0]))
        p = prefix(CAR, t, len(t) // 2)
        ref = integrate_car(a, p.controls)
        np.testing.assert_allclose(ref[-1, :2], p.end[:2], atol=1e-3)
        # arc length equals the integral of the speed
        assert p.length == pytest.approx(np.hypot(*np.diff(ref[:, :2], axis=0).T).sum(), rel=1e-2)

    def test_holonomic_prefix_is_a_shorter_line(self):
        t = Trajectory("holonomic", np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]),
                       np.zeros((0, 3)), 2 * math.sqrt(2))
        p = prefix(HOLO, t, 1)
        assert p.length == pytest.approx(math.sqrt(2)) and p.end.tolist() == [1.0, 1.0]

    def test_index_bounds(self):
        t = steer(HOLO, np.zeros(2), np.array([3.0, 0.0]))
        with pytest.raises(ValueError):
            prefix(HOLO, t, 0)
        with pytest.raises(ValueError):
            prefix(HOLO, t, 2)
