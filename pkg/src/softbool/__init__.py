"""Simulation and tail inference for the soft Boolean random connection model."""

from .model import ModelParams, Prediction, Regime, predict
from .randomness import Purpose, SeedContext, pair_uniform, stream_uniform
from .pointcloud import PointCloud, add_palm_origin, make_cloud, sample_cloud
from .graph import (ClusterResult, edge_present, edge_present_radius_form, explore_cluster,
                    neighbors_fast, neighbors_naive, origin_degree_above)
from .paths import MarkPath, skeleton
from .branching import BranchingParams, dwass_check, total_progeny
from .estimate import (SurvivalCurve, TailFit, fit_tail, run_degree_experiment,
                       run_diameter_experiment, run_powerful_event_experiment, run_size_experiment)

__version__ = "0.1.0"

__all__ = [
    "ModelParams", "Prediction", "Regime", "predict",
    "Purpose", "SeedContext", "pair_uniform", "stream_uniform",
    "PointCloud", "add_palm_origin", "make_cloud", "sample_cloud",
    "ClusterResult", "edge_present", "edge_present_radius_form", "explore_cluster",
    "neighbors_fast", "neighbors_naive", "origin_degree_above",
    "MarkPath", "skeleton",
    "BranchingParams", "dwass_check", "total_progeny",
    "SurvivalCurve", "TailFit", "fit_tail", "run_degree_experiment",
    "run_diameter_experiment", "run_powerful_event_experiment", "run_size_experiment",
]
