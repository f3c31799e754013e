"""
Scheduling data models.

This module defines the per-step decision vocabulary shared by the executor,
the scheduler, and the harness: the joint compute action c_t and the
scheduler observation xi_t.
"""

from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

BACKBONE_LEVELS = 5
HEAD_LEVELS = 3
JOINT_ACTIONS = BACKBONE_LEVELS * HEAD_LEVELS


class ComputeAction(BaseModel):
    """Joint decision c_t = (backbone level, head level)."""

    model_config = ConfigDict(frozen=True)

    backbone: int = Field(ge=0, le=BACKBONE_LEVELS - 1, description="0 full, 1 first/last, 2-4 skip j-1 steps")
    head: int = Field(ge=0, le=HEAD_LEVELS - 1, description="0 full, 1 middle reuse, 2 reuse after first step")

    @property
    def index(self) -> int:
        return HEAD_LEVELS * self.backbone + self.head

    @classmethod
    def from_index(cls, index: int) -> "ComputeAction":
        if not 0 <= index < JOINT_ACTIONS:
            raise ValueError(f"Joint index must be in [0, {JOINT_ACTIONS}), got {index}")
        return cls(backbone=index // HEAD_LEVELS, head=index % HEAD_LEVELS)

    def __str__(self) -> str:
        return f"({self.backbone},{self.head})"


FULL_COMPUTE = ComputeAction(backbone=0, head=0)


class SchedulerObservation(BaseModel):
    """xi_t = [rho, v_grip, v_trans, v_rot, progress], in this order."""

    model_config = ConfigDict(frozen=True)

    rho: float = Field(ge=0.0, le=1.0, description="Latest first-layer CKA against the anchor")
    v_grip: float = Field(ge=0.0)
    v_trans: float = Field(ge=0.0)
    v_rot: float = Field(ge=0.0)
    progress: float = Field(ge=0.0, le=1.0, description="step index / T_max")

    def as_tuple(self) -> Tuple[float, float, float, float, float]:
        return (self.rho, self.v_grip, self.v_trans, self.v_rot, self.progress)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.as_tuple(), dtype=np.float64)
