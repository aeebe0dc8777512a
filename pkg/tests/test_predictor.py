import json
import math

import numpy as np
import pytest

from cprrt.env import PlanningProblem, World, generate_density_world, lattice_free
from cprrt.predictor import (EmptyPath, NoGridPath, ParseError, PredictedPath, astar_predict,
                             lattice_cost, load_external_path, normalize_path)
from oracles import dijkstra_lattice_cost


def test_empty_map_is_the_diagonal():
    path = astar_predict(PlanningProblem(World()))
    assert lattice_cost(path.points) == pytest.approx(100 * math.sqrt(2), abs=1e-9)
    assert len(path) == 101
    assert path.points[0].tolist() == [0.0, 0.0]
    assert path.points[-1].tolist() == [100.0, 100.0]


@pytest.mark.parametrize("seed", range(5))
def test_matches_dijkstra(seed):
    p = generate_density_world(30, seed)
    path = astar_predict(p)
    want = dijkstra_lattice_cost(lattice_free(p.world), p.start, p.goal_center, p.goal_radius)
    assert abs(lattice_cost(path.points) - want) < 1e-9


def test_path_is_8_connected_and_free():
    p = generate_density_world(20, 3)
    pts = astar_predict(p).points
    free = lattice_free(p.world)
    steps = np.abs(np.diff(pts, axis=0))
    assert steps.max() <= 1.0 and (steps.sum(axis=1) > 0).all()
    assert all(free[int(x), int(y)] for x, y in pts)


def test_deterministic():
    p = generate_density_world(30, 11)
    assert np.array_equal(astar_predict(p).points, astar_predict(p).points)


def test_blocked_goal_raises():
    w = World(obstacles=((90.0, 90.0, 100.0, 100.0),))
    with pytest.raises(NoGridPath):
        astar_predict(PlanningProblem(w))


def test_walled_off_goal_raises():
    w = World(obstacles=((50.0, 0.0, 51.0, 100.0),))
    with pytest.raises(NoGridPath):
        astar_predict(PlanningProblem(w))


def test_occupied_goal_center_uses_disc():
    # the goal-center node is blocked but part of the disc stays reachable
    w = World(obstacles=((99.5, 99.5, 100.0, 100.0),))
    pts = astar_predict(PlanningProblem(w)).points
    assert math.hypot(pts[-1, 0] - 100, pts[-1, 1] - 100) <= 3.0
    assert lattice_cost(pts) == pytest.approx(
        dijkstra_lattice_cost(lattice_free(w), (0, 0), (100, 100), 3.0))


class TestExternal:
    problem = PlanningProblem(World())

    def test_normalization_adds_endpoints_and_clamps(self):
        path = normalize_path([[10, 10], [50, 120]], self.problem)
        assert path.points[0].tolist() == [0.0, 0.0]
        assert path.points[2].tolist() == [50.0, 100.0]
        assert path.points[-1].tolist() == [100.0, 100.0]

    def test_points_inside_obstacles_kept(self, tmp_path):
        w = World(obstacles=((40, 40, 60, 60),))
        f = tmp_path / "p.json"
        f.write_text(json.dumps([[0, 0], [50, 50], [100, 100]]))
        path = load_external_path(f, PlanningProblem(w))
        assert [50.0, 50.0] in path.points.tolist()
        assert path.source == "external"

    def test_bad_json(self, tmp_path):
        f = tmp_path / "p.json"
        f.write_text("{not json")
        with pytest.raises(ParseError):
            load_external_path(f, self.problem)

    def test_wrong_shape(self, tmp_path):
        f = tmp_path / "p.json"
        f.write_text("[1, 2, 3]")
        with pytest.raises(ParseError):
            load_external_path(f, self.problem)

    def test_empty(self, tmp_path):
        f = tmp_path / "p.json"
        f.write_text("[]")
        with pytest.raises(EmptyPath):
            load_external_path(f, self.problem)


def test_predicted_path_is_read_only():
    p = PredictedPath(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        p.points[0, 0] = 1.0
