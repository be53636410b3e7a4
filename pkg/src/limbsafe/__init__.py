"""Biomechanically safe trajectories for repositioning a passive human arm with a robot."""
from .coupling import CoupledTrajectory, ik_solve, replay_forces, robot_wrench_from_torques, sample_base_pose
from .errors import (IkDiverged, IllConditioned, InvalidEndpoint, LimbsafeError, NoFeasibleBase, NoPathFound,
                     ScenarioError, SingularConfiguration)
from .geometry import Pose
from .model import HumanArmModel, RobotArmModel, human_fk, human_jacobian, robot_fk, robot_jacobian
from .planner import HumanPath, is_valid, path_cost, plan
from .scenario import Scenario, default_scenario, load_scenario, load_scenario_file
from .statics import ClosureModel, ReactionSolution, SafetyLimits, check_safety, solve_reactions
from .trajopt import RefinedTrajectory, refine

__version__ = "0.1.0"

__all__ = [
    "ClosureModel", "CoupledTrajectory", "HumanArmModel", "HumanPath", "IkDiverged", "IllConditioned",
    "InvalidEndpoint", "LimbsafeError", "NoFeasibleBase", "NoPathFound", "Pose", "ReactionSolution",
    "RefinedTrajectory", "RobotArmModel", "SafetyLimits", "Scenario", "ScenarioError", "SingularConfiguration",
    "check_safety", "default_scenario", "human_fk", "human_jacobian", "ik_solve", "is_valid", "load_scenario",
    "load_scenario_file", "path_cost", "plan", "refine", "replay_forces", "robot_fk", "robot_jacobian",
    "robot_wrench_from_torques", "sample_base_pose", "solve_reactions",
]
