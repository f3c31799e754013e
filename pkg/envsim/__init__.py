"""
Synthetic manipulation environment with a scripted expert.
"""

from .world import (
    T_MAX,
    expert_action,
    failure_reason,
    motion_signals,
    observe,
    reset,
    robot_state_vector,
    step,
    task_potential,
    wrap_angle,
)
from .trajectory import TrajectoryRow, rollout, write_trajectory_csv

__all__ = [
    "T_MAX",
    "expert_action",
    "failure_reason",
    "motion_signals",
    "observe",
    "reset",
    "robot_state_vector",
    "step",
    "task_potential",
    "wrap_angle",
    "TrajectoryRow",
    "rollout",
    "write_trajectory_csv",
]
