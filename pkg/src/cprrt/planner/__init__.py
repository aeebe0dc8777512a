"""RRT* planning with uniform, goal-biased and prediction-set samplers."""
from .rrtstar import (PlannerConfig, PlanResult, PlanStats, extract_solution, plan,
                      rrt_star_gamma, trajectory_free)
from .sampling import (Sampler, SamplerConfig, goal_biased_sample, sample_cp,
                       sample_in_region, uniform_free_sample)
from .tree import Tree

__all__ = [
    "PlannerConfig", "PlanResult", "PlanStats", "Sampler", "SamplerConfig", "Tree",
    "extract_solution", "goal_biased_sample", "plan", "rrt_star_gamma", "sample_cp",
    "sample_in_region", "trajectory_free", "uniform_free_sample",
]
