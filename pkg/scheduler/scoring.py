"""
Reward Engine for scheduler training.

Stage 1 (teacher-shaped):
    r1 = r_succ - lambda_C * cost - lambda_B * |l_B - teacher_B| - lambda_H * |l_H - teacher_H| - lambda_R * k(l_B)
Stage 2 (teacher-free):
    r2 = r_succ - lambda_C * cost

r_succ is the terminal success bonus plus a dense distance-decrease term;
cost is the step's executed FLOPs over the full-step reference.
"""

from dataclasses import dataclass

from models import ComputeAction, RewardConfig

# Task-distance decrease that earns one unit of progress shaping (one full-speed step).
PROGRESS_UNIT = 0.05


@dataclass
class Transition:
    """What the reward needs from one control step."""
    action: ComputeAction          # executed joint action
    potential_before: float        # remaining task distance before the step
    potential_after: float
    success: bool = False          # the step placed the object
    decision_step: bool = True     # False on steps whose backbone level was forced by an open window


def success_reward(transition: Transition, cfg: RewardConfig) -> float:
    shaping = cfg.progress_weight * (transition.potential_before - transition.potential_after) / PROGRESS_UNIT
    return (cfg.success_bonus if transition.success else 0.0) + shaping


def reuse_horizon(transition: Transition) -> int:
    """k(l_B): steps of backbone reuse opened by this decision."""
    level = transition.action.backbone
    if transition.decision_step and level >= 2:
        return level - 1
    return 0


def stage1_reward(transition: Transition, teacher: ComputeAction, step_cost: float, cfg: RewardConfig) -> float:
    """
    Teacher-shaped reward. `teacher` must already be projected onto the
    step's mask, so forced window steps agree on the backbone by construction.
    """
    return (success_reward(transition, cfg)
            - cfg.lambda_cost * step_cost
            - cfg.lambda_backbone * abs(transition.action.backbone - teacher.backbone)
            - cfg.lambda_head * abs(transition.action.head - teacher.head)
            - cfg.lambda_reuse * reuse_horizon(transition))


def stage2_reward(transition: Transition, step_cost: float, cfg: RewardConfig) -> float:
    return success_reward(transition, cfg) - cfg.lambda_cost * step_cost
