"""Exploration, inspection and prediction-assisted planning behaviours."""

from .config import ConfigError, GainParams, MiningConfig, PlannerConfig, SensorConfig
from .gains import ae_gain, direction_penalty, path_value, volume_gain
from .mission import MissionState, finalize, mission_tick, run_mission, start_mission
from .roadmap import LocalGraph, NoGraph, local_graph, plan_path, travel_matrix
from .steps import (CompartmentDone, ExplorationComplete, MissionStuck, NoViewpoints, SwitchToSI,
                    ae_step, oi_step, overlap_ratio, si_plan, si_step, ve_step)
from .tsp import open_tour, tour_length
from .viewpoints import Viewpoint, compute_viewpoints, viewpoint_layout
