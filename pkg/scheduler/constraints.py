"""
Hard Constraint Validation for the joint compute action.

This module answers the binary question: "May the scheduler pick (l_B, l_H) now?"
It enforces execution reality: a cold executor has nothing to reuse, and an
open skip window pins the backbone level until the window closes. The
action head stays free in both cases except cold start.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from models import BACKBONE_LEVELS, HEAD_LEVELS, JOINT_ACTIONS, ComputeAction
from models.errors import RejectedStateError
from executor.caches import BackboneCache

OPEN = "Open"
COLD_START = "ColdStart"
SKIP_WINDOW = "SkipWindow"
RESTRICTED = "Restricted"


@dataclass
class MaskViolation:
    """Detailed reason for rejection."""
    constraint_type: str  # e.g. "ColdStart", "SkipWindow", "Restricted"
    reason: str
    step: int
    action: ComputeAction


@dataclass(frozen=True, eq=False)
class ActionMask:
    """15 booleans indexed by 3 * l_B + l_H."""
    valid: np.ndarray
    constraint_type: str = OPEN

    def __post_init__(self):
        valid = np.asarray(self.valid, dtype=bool)
        if valid.shape != (JOINT_ACTIONS,):
            raise RejectedStateError(f"Action mask must have {JOINT_ACTIONS} entries, got {valid.shape}")
        if not valid.any():
            raise RejectedStateError("Action mask allows no action")
        valid.setflags(write=False)
        object.__setattr__(self, 'valid', valid)

    @classmethod
    def full(cls) -> "ActionMask":
        return cls(np.ones(JOINT_ACTIONS, dtype=bool))

    @classmethod
    def only(cls, indices: Sequence[int], constraint_type: str = RESTRICTED) -> "ActionMask":
        valid = np.zeros(JOINT_ACTIONS, dtype=bool)
        valid[list(indices)] = True
        return cls(valid, constraint_type)

    @classmethod
    def fixed_backbone(cls, level: int, constraint_type: str = SKIP_WINDOW) -> "ActionMask":
        return cls.only([HEAD_LEVELS * level + h for h in range(HEAD_LEVELS)], constraint_type)

    def allows(self, action: ComputeAction) -> bool:
        return bool(self.valid[action.index])

    def valid_indices(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.valid)]

    def backbone_levels(self) -> List[int]:
        return [b for b in range(BACKBONE_LEVELS) if self.valid[HEAD_LEVELS * b:HEAD_LEVELS * (b + 1)].any()]

    def head_levels(self, backbone: int) -> List[int]:
        return [h for h in range(HEAD_LEVELS) if self.valid[HEAD_LEVELS * backbone + h]]

    def _intersect(self, keep: np.ndarray, what: str) -> "ActionMask":
        valid = self.valid & keep
        if not valid.any():
            raise RejectedStateError(f"Restricting to {what} leaves no valid action under a {self.constraint_type} mask")
        return ActionMask(valid, self.constraint_type if self.constraint_type != OPEN else RESTRICTED)

    def restrict_backbone(self, level: int) -> "ActionMask":
        keep = np.array([i // HEAD_LEVELS == level for i in range(JOINT_ACTIONS)])
        return self._intersect(keep, f"backbone level {level}")

    def restrict_head(self, level: int) -> "ActionMask":
        keep = np.array([i % HEAD_LEVELS == level for i in range(JOINT_ACTIONS)])
        return self._intersect(keep, f"head level {level}")

    def project(self, action: ComputeAction) -> ComputeAction:
        """Nearest mask-valid action: backbone first, then head; ties go to the lower level."""
        backbone = _nearest(action.backbone, self.backbone_levels())
        head = _nearest(action.head, self.head_levels(backbone))
        return ComputeAction(backbone=backbone, head=head)


def _nearest(level: int, options: List[int]) -> int:
    return min(options, key=lambda o: (abs(o - level), o))


def build_mask(backbone_cache: BackboneCache, step_index: int) -> ActionMask:
    """Mask for the next decision given the executor's backbone cache."""
    # 1. Cold start: nothing cached yet, only full compute is executable
    if step_index == 0 or backbone_cache.empty:
        return ActionMask.only([0], COLD_START)

    # 2. Open skip window: backbone pinned to the level that opened it
    if backbone_cache.in_skip_window:
        return ActionMask.fixed_backbone(backbone_cache.skip_level)

    return ActionMask.full()


class MaskChecker:
    """Validates a chosen action against a mask, in the order cold start, window, restriction."""

    def check(self, mask: ActionMask, action: ComputeAction, step: int) -> Optional[MaskViolation]:
        if mask.allows(action):
            return None

        if mask.constraint_type == COLD_START:
            return MaskViolation(COLD_START, f"{action} chosen before any cache exists; only (0,0) runs", step, action)

        if mask.constraint_type == SKIP_WINDOW:
            pinned = mask.backbone_levels()[0]
            return MaskViolation(SKIP_WINDOW, f"{action} breaks the open window pinned at backbone {pinned}", step, action)

        return MaskViolation(mask.constraint_type, f"{action} is masked out", step, action)


def check_action(mask: ActionMask, action: ComputeAction, step: int = 0) -> Optional[MaskViolation]:
    return MaskChecker().check(mask, action, step)
