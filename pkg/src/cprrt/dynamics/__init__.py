"""Robot models and local steering."""
from .models import (
    MODELS,
    ModelParams,
    Trajectory,
    concatenate,
    connect,
    densify,
    distance,
    distances_from,
    distances_to,
    dubins_shortest_path,
    prefix,
    single_state,
    steer,
    trajectory_cost,
    trajectory_from_dict,
    trajectory_to_dict,
)

__all__ = [
    "MODELS", "ModelParams", "Trajectory", "concatenate", "connect", "densify",
    "distance", "distances_from", "distances_to", "dubins_shortest_path",
    "prefix", "single_state", "steer", "trajectory_cost", "trajectory_from_dict",
    "trajectory_to_dict",
]
