"""
Data models package for the phase-adaptive scheduler.

This package exports the three pillars of the data architecture:
1. Robot world (EnvState, ObservationFrame, RobotAction)
2. Scheduling vocabulary (ComputeAction, SchedulerObservation)
3. Configuration and errors (ExperimentConfig and the nested module configs)
"""

from .robot import (
    ACTION_BOUNDS,
    ACTION_SIZE,
    OBSERVATION_SIZE,
    ROBOT_STATE_SIZE,
    EnvState,
    ObservationFrame,
    RobotAction,
)

from .schedule import (
    BACKBONE_LEVELS,
    FULL_COMPUTE,
    HEAD_LEVELS,
    JOINT_ACTIONS,
    ComputeAction,
    SchedulerObservation,
)

from .config import (
    CloneConfig,
    ExperimentConfig,
    Mode,
    ObservationFeatures,
    PipelineConfig,
    PpoConfig,
    RewardConfig,
    ScheduleOverride,
    TeacherConfig,
)

from .errors import (
    MissingCheckpointError,
    PhaseSchedError,
    RejectedInputError,
    RejectedStateError,
    TrainingDivergedError,
)

__all__ = [
    # --- Robot World ---
    "ACTION_BOUNDS",
    "ACTION_SIZE",
    "OBSERVATION_SIZE",
    "ROBOT_STATE_SIZE",
    "EnvState",
    "ObservationFrame",
    "RobotAction",

    # --- Scheduling Vocabulary ---
    "BACKBONE_LEVELS",
    "FULL_COMPUTE",
    "HEAD_LEVELS",
    "JOINT_ACTIONS",
    "ComputeAction",
    "SchedulerObservation",

    # --- Configuration ---
    "CloneConfig",
    "ExperimentConfig",
    "Mode",
    "ObservationFeatures",
    "PipelineConfig",
    "PpoConfig",
    "RewardConfig",
    "ScheduleOverride",
    "TeacherConfig",

    # --- Errors ---
    "MissingCheckpointError",
    "PhaseSchedError",
    "RejectedInputError",
    "RejectedStateError",
    "TrainingDivergedError",
]
