"""
The Phase-Adaptive Scheduler Training Engine.

Two-stage Maskable PPO over frozen-surrogate rollouts:
1. Stage 1 optimizes the teacher-shaped reward from a fresh policy.
2. Stage 2 starts from the stage-1 checkpoint and optimizes the teacher-free reward.

Every rollout runs through the executor, so the cold-start rule and the
skip-window masks are the same ones used in evaluation.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from models import PpoConfig, RewardConfig, TeacherConfig
from models.errors import RejectedInputError, TrainingDivergedError
from numerics import Rng
from costmodel import CostTable, component_flops
from surrogate.pipeline import SurrogateWeights
from .policy import SchedulerPolicy
from .ppo import PpoOptimizer, RolloutBatch, compute_gae
from .rollout import EpisodeResult, run_episode
from .schedules import PolicySchedule, RandomSchedule, Schedule
from .state import EpisodeOutcome, TrainingState, UpdateRecord

logger = logging.getLogger(__name__)

# Training episode seeds live far above the evaluation and demonstration ranges.
TRAIN_SEED_BASE = 1_000_000


class SchedulerTrainer:
    """
    Main training engine.
    Ingests a frozen surrogate and configs, outputs a trained SchedulerPolicy and its log.
    """

    def __init__(self, weights: SurrogateWeights, ppo: PpoConfig, reward: RewardConfig,
                 teacher: TeacherConfig, seed: int, init_policy: Optional[SchedulerPolicy] = None,
                 table: Optional[CostTable] = None):
        if ppo.stage == 2 and init_policy is None:
            raise RejectedInputError("Stage-2 training must start from a stage-1 checkpoint")
        self.weights = weights
        self.ppo = ppo
        self.reward = reward
        self.teacher = teacher
        self.seed = seed
        self.table = table or component_flops(weights.config)

        init_rng, self.sample_rng, self.update_rng, self.baseline_rng = Rng.for_stream(
            seed, "scheduler", ppo.stage).split(4)
        if init_policy is not None:
            self.policy = init_policy.copy()
            self.policy.features = ppo.observation_features
        else:
            self.policy = SchedulerPolicy.initialize(ppo, init_rng)
        self.optimizer = PpoOptimizer(self.policy, ppo)
        self.state = TrainingState(ppo.stage, seed)

    def episode_seeds(self, update: int) -> List[int]:
        n = self.ppo.episodes_per_update
        base = TRAIN_SEED_BASE + self.seed * 100_000 + (self.ppo.stage - 1) * 50_000
        return [base + update * n + i for i in range(n)]

    def collect(self, schedule: Schedule, seeds: List[int]) -> List[EpisodeResult]:
        return [run_episode(s, schedule, self.weights, self.reward, self.teacher, self.table) for s in seeds]

    def _episode_return(self, result: EpisodeResult) -> float:
        return float(np.sum(result.rewards(self.ppo.stage)))

    def build_batch(self, results: List[EpisodeResult]) -> RolloutBatch:
        inputs, masks, actions, log_probs, values, rewards, dones = [], [], [], [], [], [], []
        for result in results:
            last = len(result.decisions) - 1
            for t, (decision, r) in enumerate(zip(result.decisions, result.rewards(self.ppo.stage))):
                inputs.append(decision.inputs)
                masks.append(decision.mask.valid)
                actions.append(decision.action.index)
                log_probs.append(decision.log_prob)
                values.append(decision.value)
                rewards.append(r)
                dones.append(t == last)
        advantages, returns = compute_gae(rewards, values, dones, self.ppo.gamma, self.ppo.gae_lambda)
        return RolloutBatch(np.stack(inputs), np.stack(masks), np.asarray(actions),
                            np.asarray(log_probs), advantages, returns)

    def run(self) -> Tuple[SchedulerPolicy, TrainingState]:
        ppo = self.ppo
        logger.info(f"🚀 Stage-{ppo.stage} scheduler training: {ppo.updates} updates x "
                    f"{ppo.episodes_per_update} episodes (seed={self.seed}, features={ppo.observation_features.value})")

        # 1. Divergence baseline: a uniform random schedule on the first update's episodes
        baseline = self.collect(RandomSchedule(self.baseline_rng), self.episode_seeds(0))
        self.state.baseline_reward = float(np.mean([self._episode_return(r) for r in baseline]))
        logger.info(f"   random-schedule baseline reward: {self.state.baseline_reward:.3f}")

        schedule = PolicySchedule(self.policy, rng=self.sample_rng, name=f"stage{ppo.stage}")
        for update in range(ppo.updates):
            # 2. Collect on-policy episodes
            results = self.collect(schedule, self.episode_seeds(update))
            for r in results:
                self.state.record_episode(EpisodeOutcome(update, r.seed, r.success, r.reason,
                                                         self._episode_return(r), r.speedup))

            # 3. Optimize over the gathered batch
            batch = self.build_batch(results)
            stats = self.optimizer.update(self.policy, batch, self.update_rng)

            record = UpdateRecord(
                update=update, stage=ppo.stage, episodes=len(results), steps=len(batch),
                mean_reward=float(np.mean([self._episode_return(r) for r in results])),
                mean_speedup=float(np.mean([r.speedup for r in results])),
                success_rate=float(np.mean([r.success for r in results])),
                policy_loss=stats["policy_loss"], value_loss=stats["value_loss"], entropy=stats["entropy"],
                clip_fraction=stats["clip_fraction"], grad_norm=stats["grad_norm"],
            )
            self.state.record_update(record)
            logger.info(f"   update {update + 1}/{ppo.updates}: reward={record.mean_reward:.3f} "
                        f"success={record.success_rate:.2f} speedup={record.mean_speedup:.2f}x "
                        f"entropy={record.entropy:.3f}")

            # 4. Divergence guard
            if self.state.below_baseline_streak >= ppo.divergence_patience:
                recent = [round(u.mean_reward, 3) for u in self.state.updates[-ppo.divergence_patience:]]
                raise TrainingDivergedError(
                    f"Stage-{ppo.stage} training diverged at update {update}: mean reward stayed below the "
                    f"random-schedule baseline {self.state.baseline_reward:.3f} for {ppo.divergence_patience} "
                    f"consecutive updates (recent: {recent})")

        logger.info(f"✅ Stage-{ppo.stage} training complete: {self.state.get_statistics()}")
        return self.policy, self.state


def train_scheduler(weights: SurrogateWeights, ppo: PpoConfig, reward: RewardConfig, teacher: TeacherConfig,
                    seed: int, init_policy: Optional[SchedulerPolicy] = None) -> Tuple[SchedulerPolicy, TrainingState]:
    return SchedulerTrainer(weights, ppo, reward, teacher, seed, init_policy).run()
