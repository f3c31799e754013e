"""
Rule-guided teacher: hand-set thresholds on the stability probe and the
motion signals. Supplies shaping targets in stage 1 and serves as the
"threshold" scheduler in evaluation.
"""

from typing import Tuple

from models import ComputeAction, SchedulerObservation, TeacherConfig
from .constraints import ActionMask


def teacher_levels(obs: SchedulerObservation, cfg: TeacherConfig) -> Tuple[int, int]:
    """Unprojected (l_B, l_H)."""
    backbone = 0
    # Thresholds are descending and map to levels 4, 3, 2, 1.
    for level, threshold in zip((4, 3, 2, 1), cfg.rho_thresholds):
        if obs.rho >= threshold:
            backbone = level
            break

    if obs.v_trans > cfg.head_fast_trans and obs.v_grip < cfg.head_still_grip:
        head = 2
    elif obs.v_trans > cfg.head_slow_trans:
        head = 1
    else:
        head = 0
    return backbone, head


def teacher_action(obs: SchedulerObservation, mask: ActionMask, cfg: TeacherConfig) -> ComputeAction:
    backbone, head = teacher_levels(obs, cfg)
    return mask.project(ComputeAction(backbone=backbone, head=head))
