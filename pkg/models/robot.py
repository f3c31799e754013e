"""
Robot-side data models for the synthetic pick-and-place world.

This module defines what the environment exchanges with the policy:
1. EnvState (the full simulator state s_t)
2. ObservationFrame (the desk-scale stand-in for the camera image)
3. RobotAction (one executable command)
"""

from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

OBSERVATION_SIZE = 16
ROBOT_STATE_SIZE = 6
ACTION_SIZE = 4

# Per-step clip bounds: vx, vy (m/step), orientation rate (rad/step), aperture rate.
ACTION_BOUNDS: Tuple[float, float, float, float] = (0.05, 0.05, 0.1, 0.2)


class EnvState(BaseModel):
    """Complete simulator state. Immutable; step() returns a new instance."""

    model_config = ConfigDict(frozen=True)

    effector: Tuple[float, float] = Field(default=(0.0, 0.0), description="End-effector position (m)")
    orientation: float = Field(default=0.0, description="End-effector yaw (rad), wrapped to (-pi, pi]")
    aperture: float = Field(default=1.0, ge=0.0, le=1.0, description="Gripper opening, 1 = open")
    object_pos: Tuple[float, float] = Field(description="Object position (m)")
    goal_pos: Tuple[float, float] = Field(description="Placement target (m)")
    holding: bool = Field(default=False)
    step_index: int = Field(default=0, ge=0)
    max_steps: int = Field(default=200, ge=1, description="T_max")
    seed: int = Field(default=0, description="Episode seed; keys the distractor noise stream")
    done: bool = False
    success: bool = False
    dropped: bool = Field(default=False, description="True once a held object was released off-goal")

    @model_validator(mode='after')
    def validate_invariants(self):
        if self.step_index > self.max_steps:
            raise ValueError("step_index cannot exceed max_steps")
        if self.holding and self.object_pos != self.effector:
            raise ValueError("A held object must sit at the effector position")
        if self.success and not self.done:
            raise ValueError("Success implies done")
        return self


class ObservationFrame(BaseModel):
    """Fixed-length feature vector standing in for the image observation I_t."""

    model_config = ConfigDict(frozen=True)

    features: Tuple[float, ...] = Field(description="16 finite entries")

    @field_validator('features')
    @classmethod
    def validate_features(cls, v):
        if len(v) != OBSERVATION_SIZE:
            raise ValueError(f"Observation must have {OBSERVATION_SIZE} entries, got {len(v)}")
        if not all(np.isfinite(v)):
            raise ValueError("Observation entries must be finite")
        return v

    def as_array(self) -> np.ndarray:
        return np.asarray(self.features, dtype=np.float64)


class RobotAction(BaseModel):
    """One command. Components are clipped to ACTION_BOUNDS on construction via clipped()."""

    model_config = ConfigDict(frozen=True)

    velocity: Tuple[float, float] = (0.0, 0.0)
    orientation_rate: float = 0.0
    aperture_rate: float = 0.0

    def clipped(self) -> "RobotAction":
        bx, by, bw, ba = ACTION_BOUNDS
        return RobotAction(
            velocity=(float(np.clip(self.velocity[0], -bx, bx)), float(np.clip(self.velocity[1], -by, by))),
            orientation_rate=float(np.clip(self.orientation_rate, -bw, bw)),
            aperture_rate=float(np.clip(self.aperture_rate, -ba, ba)),
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.velocity[0], self.velocity[1], self.orientation_rate, self.aperture_rate])

    def normalized(self) -> np.ndarray:
        """Components in units of the clip bounds (the cloning target space)."""
        return self.as_array() / np.asarray(ACTION_BOUNDS)

    @classmethod
    def from_array(cls, values) -> "RobotAction":
        v = [float(x) for x in values]
        if len(v) != ACTION_SIZE:
            raise ValueError(f"Action vector must have {ACTION_SIZE} entries")
        return cls(velocity=(v[0], v[1]), orientation_rate=v[2], aperture_rate=v[3]).clipped()

    @classmethod
    def from_normalized(cls, values) -> "RobotAction":
        return cls.from_array(np.asarray(values, dtype=np.float64) * np.asarray(ACTION_BOUNDS))
