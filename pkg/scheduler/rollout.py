"""
Executor-driven episodes.

One episode couples the synthetic world, a PhaseExecutor over the frozen
surrogate, and a Schedule. Each control step:
    1. build the mask from the executor's caches
    2. ask the schedule for (l_B, l_H) and the teacher for its projected levels
    3. execute, step the world, score both reward stages
    4. assemble the next scheduler observation
"""

import logging
import time
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional

import numpy as np

from models import RewardConfig, SchedulerObservation, TeacherConfig
from models.errors import RejectedStateError
from envsim import T_MAX, failure_reason, reset, step, task_potential
from executor import PhaseExecutor
from costmodel import CostTable, FlopsLedger
from signals import build_observation, cka
from surrogate.pipeline import SurrogateWeights, backbone_full, encode
from .constraints import build_mask, check_action
from .schedules import Decision, Schedule
from .scoring import Transition, stage1_reward, stage2_reward
from .teacher import teacher_action

logger = logging.getLogger(__name__)


@dataclass
class StepRecord:
    """One row of the per-step execution trace."""
    step: int
    rho: float
    probed: bool
    v_grip: float
    v_trans: float
    v_rot: float
    progress: float
    requested_backbone: int
    requested_head: int
    backbone: int
    head: int
    teacher_backbone: int
    teacher_head: int
    forced: bool
    skip_remaining: int
    step_cost: float
    reward_stage1: float
    reward_stage2: float
    done: bool
    success: bool
    cka_first: Optional[float] = None   # shadow consecutive-step CKA, diagnostics only
    cka_last: Optional[float] = None

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def as_row(self) -> dict:
        return asdict(self)


@dataclass
class EpisodeResult:
    seed: int
    schedule: str
    records: List[StepRecord]
    decisions: List[Decision]
    ledger: FlopsLedger
    success: bool
    reason: str
    latency_ms: float = 0.0
    rewards_stage1: List[float] = field(default_factory=list)
    rewards_stage2: List[float] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.records)

    @property
    def speedup(self) -> float:
        return self.ledger.speedup()

    @property
    def mean_rho(self) -> float:
        return float(np.mean([r.rho for r in self.records])) if self.records else 1.0

    def rewards(self, stage: int) -> List[float]:
        return self.rewards_stage1 if stage == 1 else self.rewards_stage2


def run_episode(seed: int, schedule: Schedule, weights: SurrogateWeights,
                reward_cfg: Optional[RewardConfig] = None, teacher_cfg: Optional[TeacherConfig] = None,
                table: Optional[CostTable] = None, max_steps: int = T_MAX, shadow: bool = False) -> EpisodeResult:
    reward_cfg = reward_cfg or RewardConfig()
    teacher_cfg = teacher_cfg or TeacherConfig()
    config = weights.config

    state, frame = reset(seed, max_steps)
    executor = PhaseExecutor(weights, table)
    obs: SchedulerObservation = build_observation(1.0, state, state)
    records, decisions, r1s, r2s = [], [], [], []
    prev_shadow = None
    elapsed = 0.0

    while not state.done:
        mask = build_mask(executor.backbone_cache, state.step_index)
        teacher = teacher_action(obs, mask, teacher_cfg)
        decision = schedule.decide(obs, mask, state.step_index)
        violation = check_action(decision.mask, decision.action, state.step_index)
        if violation is None and decision.mask is not mask:
            violation = check_action(mask, decision.action, state.step_index)
        if violation:
            raise RejectedStateError(f"[{violation.constraint_type}] step {violation.step}: {violation.reason}")

        decision_step = not executor.backbone_cache.in_skip_window
        tick = time.perf_counter()
        outcome = executor.step(decision.action, frame, state)
        elapsed += time.perf_counter() - tick

        if shadow:
            trace = backbone_full(config, weights, encode(config, weights, frame))
            first, last = trace.hidden[1], trace.hidden[-1]
            cka_first = cka(first, prev_shadow[0]) if prev_shadow else None
            cka_last = cka(last, prev_shadow[1]) if prev_shadow else None
            prev_shadow = (first, last)
        else:
            cka_first = cka_last = None

        next_state, frame, done, success = step(state, outcome.actions[0])
        transition = Transition(
            action=outcome.executed,
            potential_before=task_potential(state),
            potential_after=task_potential(next_state),
            success=success,
            decision_step=decision_step,
        )
        r1 = stage1_reward(transition, teacher, outcome.step_cost, reward_cfg)
        r2 = stage2_reward(transition, outcome.step_cost, reward_cfg)

        records.append(StepRecord(
            step=state.step_index, rho=obs.rho, probed=outcome.probed,
            v_grip=obs.v_grip, v_trans=obs.v_trans, v_rot=obs.v_rot, progress=obs.progress,
            requested_backbone=decision.action.backbone, requested_head=decision.action.head,
            backbone=outcome.executed.backbone, head=outcome.executed.head,
            teacher_backbone=teacher.backbone, teacher_head=teacher.head,
            forced=outcome.forced_backbone, skip_remaining=outcome.skip_remaining,
            step_cost=outcome.step_cost, reward_stage1=r1, reward_stage2=r2,
            done=done, success=success, cka_first=cka_first, cka_last=cka_last,
        ))
        decisions.append(decision)
        r1s.append(r1)
        r2s.append(r2)

        obs = build_observation(executor.rho, state, next_state)
        state = next_state

    reason = failure_reason(state)
    logger.debug(f"episode {seed} [{schedule.name}]: {reason} after {len(records)} steps, "
                 f"speedup {executor.ledger.speedup():.2f}x")
    return EpisodeResult(
        seed=seed, schedule=schedule.name, records=records, decisions=decisions, ledger=executor.ledger,
        success=state.success, reason=reason,
        latency_ms=1000.0 * elapsed / max(len(records), 1),
        rewards_stage1=r1s, rewards_stage2=r2s,
    )
