import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cprrt.env import (MAZE_CELLS, PlanningProblem, World, WorldGenerationError,
                       generate_density_world, generate_maze_world, in_goal, is_free,
                       lattice_free, load_problem, maze_cell_graph_connected,
                       passage_connected, points_free,
                       polyline_free, problem_from_dict, problem_to_dict, save_problem,
                       segment_free)
from cprrt.predictor import astar_predict
from oracles import (brute_is_free, monte_carlo_occupancy, segment_hits_rect,
                     segment_rect_clearance)


@pytest.fixture(scope="module")
def dense_world():
    return generate_density_world(30, seed=4).world


def test_world_rejects_obstacle_outside_bounds():
    with pytest.raises(ValueError):
        World(obstacles=((90.0, 90.0, 101.0, 95.0),))


def test_world_is_immutable():
    w = World(obstacles=((1, 1, 2, 2),))
    with pytest.raises(Exception):
        w.obstacles = ()
    with pytest.raises(ValueError):
        w.rects[0, 0] = 5.0


def test_overlapping_obstacles_allowed():
    w = World(obstacles=((10, 10, 20, 20), (15, 15, 25, 25)))
    assert not is_free(w, (17, 17))
    assert is_free(w, (22, 12))


class TestIsFree:
    def test_outside_bounds(self):
        w = World()
        assert not is_free(w, (-0.1, 50))
        assert not is_free(w, (50, 100.5))

    def test_bounds_are_closed(self):
        assert is_free(World(), (0.0, 0.0))
        assert is_free(World(), (100.0, 100.0))

    def test_inside_obstacle(self):
        w = World(obstacles=((10, 10, 20, 20),))
        assert not is_free(w, (15, 15))

    def test_obstacle_boundary_is_occupied(self):
        w = World(obstacles=((10, 10, 20, 20),))
        assert not is_free(w, (10.0, 15.0))
        assert not is_free(w, (20.0, 20.0))

    def test_matches_brute_force(self, dense_world):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-5, 105, size=(10_000, 2))
        got = points_free(dense_world, pts)
        want = [brute_is_free(x, y, dense_world.obstacles, dense_world.bounds) for x, y in pts]
        assert got.tolist() == want


class TestSegmentFree:
    def test_degenerate_segment(self):
        assert segment_free(World(), (3, 3), (3, 3))

    def test_crossing_obstacle(self):
        w = World(obstacles=((10, 10, 20, 20),))
        assert not segment_free(w, (5, 15), (25, 15), 0.25)

    def test_rejects_nonpositive_resolution(self):
        with pytest.raises(ValueError):
            segment_free(World(), (0, 0), (1, 1), 0.0)

    def test_against_exact_intersection(self, dense_world):
        rng = np.random.default_rng(1)
        res = 0.25
        disagree, near_misses = [], 0
        for _ in range(1000):
            a = rng.uniform(0, 100, 2)
            b = a + rng.uniform(-15, 15, 2)
            b = np.clip(b, 0, 100)
            hits = [segment_hits_rect(a, b, r) for r in dense_world.obstacles]
            exact_free = not any(hits)
            got = segment_free(dense_world, a, b, res)
            if got != exact_free:
                # sampling can only miss thin intersections, never invent one
                assert got and not exact_free
                depth = max(_penetration(a, b, r) for r, h in zip(dense_world.obstacles, hits) if h)
                disagree.append(depth)
            clearance = min(segment_rect_clearance(a, b, r) for r in dense_world.obstacles)
            if 0 < clearance < res:
                near_misses += 1
        print(f"segment oracle: {len(disagree)} sampling misses, {near_misses} near misses")
        # every miss is a graze shallower than the sampling resolution
        assert all(d < res for d in disagree)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0, 100), min_size=4, max_size=4))
    def test_symmetric(self, c):
        w = World(obstacles=((30, 30, 40, 70), (60, 10, 61, 90)))
        a, b = (c[0], c[1]), (c[2], c[3])
        assert segment_free(w, a, b) == segment_free(w, b, a)

    def test_polyline(self):
        w = World(obstacles=((10, 10, 20, 20),))
        assert polyline_free(w, np.array([[0, 0], [5, 0], [5, 30]]))
        assert not polyline_free(w, np.array([[0, 0], [15, 0], [15, 30]]))


def _penetration(a, b, rect):
    """Longest stretch of the segment that lies inside ``rect`` (via fine sampling)."""
    t = np.linspace(0, 1, 20001)
    p = np.outer(1 - t, a) + np.outer(t, b)
    inside = (p[:, 0] >= rect[0]) & (p[:, 0] <= rect[2]) & (p[:, 1] >= rect[1]) & (p[:, 1] <= rect[3])
    return float(inside.sum()) / len(t) * math.dist(a, b)


class TestInGoal:
    problem = PlanningProblem(World())

    def test_center(self):
        assert in_goal(self.problem, (100, 100))

    def test_boundary_closed(self):
        assert in_goal(self.problem, (97.0, 100.0))
        assert not in_goal(self.problem, (96.999, 100.0))

    def test_dubins_state(self):
        assert math.isclose(math.hypot(2, 1), 2.2360679, rel_tol=1e-7)
        assert in_goal(self.problem, (98, 99, math.pi))

    @given(st.floats(-10, 10), st.floats(0, 5), st.floats(-0.2, 0.2))
    def test_ignores_non_positional(self, th, v, k):
        for pos in ((99, 98), (50, 50)):
            assert in_goal(self.problem, (*pos, th, v, k)) == in_goal(self.problem, pos)


class TestDensityWorld:
    def test_density_10_seed_1(self):
        p = generate_density_world(10, seed=1)
        occ = p.world.occupancy()
        assert 0.08 <= occ <= 0.12
        assert is_free(p.world, p.start) and is_free(p.world, p.goal_center)

    def test_deterministic(self):
        a = generate_density_world(10, seed=1)
        b = generate_density_world(10, seed=1)
        assert a.world.obstacles == b.world.obstacles
        assert a.world.obstacles != generate_density_world(10, seed=2).world.obstacles

    def test_density_50_seed_7_monte_carlo(self):
        p = generate_density_world(50, seed=7)
        occ = p.world.occupancy()
        assert 0.48 <= occ <= 0.52
        mc = monte_carlo_occupancy(p.world.obstacles, p.world.bounds)
        assert abs(mc - occ) <= 0.01

    @pytest.mark.parametrize("density", [10, 20, 30, 40, 50])
    def test_occupancy_band_and_clearance(self, density):
        for seed in range(3):
            p = generate_density_world(density, seed)
            assert abs(p.world.occupancy() - density / 100) <= 0.02
            assert p.world.density_label == density
            for (x0, y0, x1, y1) in p.world.obstacles:
                # 10 m clearance around the start and the goal center
                cx, cy = min(max(0, x0), x1), min(max(0, y0), y1)
                assert math.hypot(cx, cy) > 10.0
                gx, gy = min(max(100, x0), x1), min(max(100, y0), y1)
                assert math.hypot(gx - 100, gy - 100) > 10.0

    def test_out_of_range_density(self):
        with pytest.raises(ValueError):
            generate_density_world(0, seed=0)
        with pytest.raises(ValueError):
            generate_density_world(61, seed=0)

    def test_hairline_gap_is_not_a_passage(self):
        # the start pocket opens only through a 0.3 m slot along the world edge;
        # lattice points at x = 0 are free, so A* still gets through
        w = World(obstacles=((0.3, 5.0, 11.0, 6.0), (10.0, 0.0, 11.0, 6.0)))
        p = PlanningProblem(w)
        assert not passage_connected(p)
        assert passage_connected(PlanningProblem(World(obstacles=((1.3, 5.0, 11.0, 6.0),))))
        assert astar_predict(p).points[5].tolist() == [0.0, 5.0]

    @pytest.mark.parametrize("density", [10, 30, 50])
    def test_generated_worlds_have_corridors(self, density):
        for seed in range(3):
            assert passage_connected(generate_density_world(density, seed))

    def test_unsatisfiable_clearance_raises(self):
        with pytest.raises(WorldGenerationError):
            generate_density_world(30, seed=0, max_retries=2, side_range=(99.0, 100.0))


class TestMaze:
    def test_bfs_connected(self):
        p = generate_maze_world(3)
        assert maze_cell_graph_connected(p)

    def test_deterministic(self):
        assert generate_maze_world(3).world == generate_maze_world(3).world
        assert generate_maze_world(3).world != generate_maze_world(4).world

    @pytest.mark.parametrize("seed", range(10))
    def test_walls_within_bounds_and_perfect(self, seed):
        p = generate_maze_world(seed)
        x0, y0, x1, y1 = p.world.bounds
        for r in p.world.obstacles:
            assert x0 <= r[0] <= r[2] <= x1 and y0 <= r[1] <= r[3] <= y1
        assert maze_cell_graph_connected(p)
        assert is_free(p.world, p.start) and is_free(p.world, p.goal_center)
        # a perfect maze on an n x n grid keeps n^2 - 1 passages: count open shared sides
        n, c = MAZE_CELLS, 100 / MAZE_CELLS
        opened = sum(is_free(p.world, (c * (i + 1), c * (j + 0.5))) for i in range(n - 1) for j in range(n))
        opened += sum(is_free(p.world, (c * (i + 0.5), c * (j + 1))) for i in range(n) for j in range(n - 1))
        assert opened == n * n - 1


def test_lattice_free_matches_is_free(dense_world):
    free = lattice_free(dense_world)
    assert free.shape == (101, 101)
    for i, j in [(0, 0), (37, 52), (100, 100), (64, 3)]:
        assert free[i, j] == is_free(dense_world, (i, j))


def test_problem_json_roundtrip(tmp_path):
    p = generate_density_world(20, seed=5)
    path = tmp_path / "p.json"
    save_problem(p, path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    assert set(raw) >= {"bounds", "obstacles", "start", "goal_center", "goal_radius"}
    q = load_problem(path)
    assert q == p
    assert problem_from_dict(problem_to_dict(p)) == p
