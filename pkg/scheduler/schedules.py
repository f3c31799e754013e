"""
Decision makers the rollout loop can drive: full compute, the threshold
teacher, uniform random, and a (possibly restricted) learned policy.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from models import FULL_COMPUTE, ComputeAction, SchedulerObservation, TeacherConfig
from numerics import Rng
from .constraints import ActionMask
from .policy import SchedulerPolicy, policy_forward, uniform_distribution
from .teacher import teacher_action


@dataclass
class Decision:
    action: ComputeAction
    mask: ActionMask                        # mask the action was drawn under
    log_prob: float = 0.0
    value: float = 0.0
    inputs: Optional[np.ndarray] = None     # policy input, kept for training


class Schedule:
    name = "schedule"

    def decide(self, obs: SchedulerObservation, mask: ActionMask, step: int) -> Decision:
        raise NotImplementedError


class FullSchedule(Schedule):
    name = "full"

    def decide(self, obs, mask, step):
        return Decision(mask.project(FULL_COMPUTE), mask)


class ThresholdSchedule(Schedule):
    name = "threshold"

    def __init__(self, cfg: TeacherConfig):
        self.cfg = cfg

    def decide(self, obs, mask, step):
        return Decision(teacher_action(obs, mask, self.cfg), mask)


class RandomSchedule(Schedule):
    """Uniform over mask-valid joint actions."""
    name = "random"

    def __init__(self, rng: Rng):
        self.rng = rng

    def decide(self, obs, mask, step):
        dist = uniform_distribution(mask)
        index = dist.sample(self.rng)
        return Decision(ComputeAction.from_index(index), mask, log_prob=dist.log_prob(index))


class PolicySchedule(Schedule):
    """
    Learned scheduler. Samples when an rng is given (training), otherwise
    acts greedily. `backbone_level` / `head_level` pin one component on
    top of the executor mask (the force-*-full evaluations).
    """

    def __init__(self, policy: SchedulerPolicy, rng: Optional[Rng] = None, name: str = "policy",
                 backbone_level: Optional[int] = None, head_level: Optional[int] = None):
        self.policy = policy
        self.rng = rng
        self.name = name
        self.backbone_level = backbone_level
        self.head_level = head_level

    def restrict(self, mask: ActionMask) -> ActionMask:
        if self.backbone_level is not None and self.backbone_level in mask.backbone_levels():
            mask = mask.restrict_backbone(self.backbone_level)
        if self.head_level is not None:
            mask = mask.restrict_head(self.head_level)
        return mask

    def decide(self, obs, mask, step):
        mask = self.restrict(mask)
        dist, value = policy_forward(self.policy, obs, mask)
        index = dist.sample(self.rng) if self.rng is not None else dist.mode()
        return Decision(ComputeAction.from_index(index), mask, log_prob=dist.log_prob(index),
                        value=value, inputs=self.policy.inputs(obs))
