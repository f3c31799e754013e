"""
Experiment Drivers.

Every mode reads one ExperimentConfig and writes its artifacts under
config.output_dir:
    surrogate/                 frozen weight bundle (clone)
    stage1.json, stage2.json   scheduler checkpoints (train-stage1, train-stage2)
    report.json, table.csv     evaluation report (eval); timing.json kept apart
    trace_<seed>.csv           per-step traces (eval, diagnose)
    ablation.json, ablation.csv
    timeline_<seed>.svg, diagnose.json (diagnose)
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from models import ExperimentConfig, ObservationFeatures, RewardConfig, ScheduleOverride, TeacherConfig
from models.errors import RejectedInputError
from numerics import Rng
from costmodel import CostTable, component_flops, net_flops
from generators.demo_factory import collect_demonstrations
from surrogate import SurrogateWeights, clone_behavior, dataset_loss, load_bundle, save_bundle
from scheduler.checkpoint import load_checkpoint, save_checkpoint
from scheduler.engine import train_scheduler
from scheduler.policy import SchedulerPolicy
from scheduler.rollout import EpisodeResult, run_episode
from scheduler.schedules import FullSchedule, PolicySchedule, RandomSchedule, Schedule, ThresholdSchedule
from .reports import (
    aggregate,
    failure_report,
    phase_usage,
    seed_row,
    timing_summary,
    write_json,
    write_table_csv,
    write_trace_csv,
)
from .phases import expert_phase_similarity
from .timeline import write_timeline_svg

logger = logging.getLogger(__name__)

SURROGATE_DIR = "surrogate"
ABLATION_POLICIES = (
    ScheduleOverride.FULL,
    ScheduleOverride.THRESHOLD,
    ScheduleOverride.STAGE1,
    ScheduleOverride.STAGE2,
    ScheduleOverride.FORCE_LLM_FULL,
    ScheduleOverride.FORCE_AH_FULL,
)
ABLATION_FEATURES = (
    ObservationFeatures.CKA_PROGRESS,
    ObservationFeatures.SPEED_PROGRESS,
    ObservationFeatures.ALL,
)
_POLICY_STAGE = {
    ScheduleOverride.STAGE1: 1,
    ScheduleOverride.STAGE2: 2,
    ScheduleOverride.FORCE_LLM_FULL: 2,
    ScheduleOverride.FORCE_AH_FULL: 2,
}


def surrogate_dir(config: ExperimentConfig) -> Path:
    return Path(config.output_dir) / SURROGATE_DIR


def checkpoint_path(output_dir: Path, stage: int) -> Path:
    return Path(output_dir) / f"stage{stage}.json"


def required_stage(override: ScheduleOverride) -> Optional[int]:
    """Scheduler checkpoint stage a policy needs, or None for checkpoint-free schedules."""
    return _POLICY_STAGE.get(override)


def make_schedule(override: ScheduleOverride, seed: int, teacher: TeacherConfig,
                  policy: Optional[SchedulerPolicy] = None) -> Schedule:
    """A fresh schedule for one evaluation episode; random draws depend only on the episode seed."""
    if override == ScheduleOverride.FULL:
        return FullSchedule()
    if override == ScheduleOverride.THRESHOLD:
        return ThresholdSchedule(teacher)
    if override == ScheduleOverride.RANDOM:
        return RandomSchedule(Rng.for_stream(seed, "random-schedule"))
    if policy is None:
        raise RejectedInputError(f"Policy '{override.value}' needs a scheduler checkpoint")
    if override == ScheduleOverride.FORCE_LLM_FULL:
        return PolicySchedule(policy, name=override.value, backbone_level=0)
    if override == ScheduleOverride.FORCE_AH_FULL:
        return PolicySchedule(policy, name=override.value, head_level=0)
    return PolicySchedule(policy, name=override.value)


@dataclass
class EvalJob:
    """Everything one worker needs to replay one seed."""
    seed: int
    override: ScheduleOverride
    weights: SurrogateWeights
    policy: Optional[SchedulerPolicy]
    reward: RewardConfig
    teacher: TeacherConfig
    table: CostTable
    shadow: bool = False


def evaluate_seed(job: EvalJob) -> EpisodeResult:
    schedule = make_schedule(job.override, job.seed, job.teacher, job.policy)
    return run_episode(job.seed, schedule, job.weights, job.reward, job.teacher, job.table, shadow=job.shadow)


def evaluate_policy(config: ExperimentConfig, weights: SurrogateWeights, override: ScheduleOverride,
                    policy: Optional[SchedulerPolicy] = None, seeds: Optional[List[int]] = None) -> List[EpisodeResult]:
    """Run one policy over a seed set; results come back ordered by seed position."""
    seeds = list(seeds if seeds is not None else config.eval_seeds)
    table = component_flops(weights.config)
    jobs = [EvalJob(s, override, weights, policy, config.reward, config.teacher, table) for s in seeds]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(evaluate_seed, jobs))
    else:
        results = [evaluate_seed(job) for job in jobs]

    summary = aggregate(results)
    logger.info(f"   {override.value:>15}: success={summary['success_rate']:.2%} "
                f"speedup={summary['speedup']:.2f}x mean_rho={summary['mean_rho']:.4f}")
    return results


def scheduler_flops(policy: Optional[SchedulerPolicy]) -> int:
    """Per-step policy-net forward cost; zero for fixed schedules."""
    if policy is None:
        return 0
    return net_flops(policy.policy_net.sizes)


def load_policy(output_dir: Path, override: ScheduleOverride) -> Optional[SchedulerPolicy]:
    stage = required_stage(override)
    if stage is None:
        return None
    return load_checkpoint(checkpoint_path(output_dir, stage)).to_policy()


# --- Modes ---

def run_clone(config: ExperimentConfig) -> Dict[str, Any]:
    """Collect demonstrations, behavior-clone the surrogate, freeze it and measure its baseline success."""
    logger.info("--- Phase 1: Expert Demonstrations ---")
    dataset = collect_demonstrations(config.clone.episodes, config.seed, config.clone.perturbation_std)

    logger.info("--- Phase 2: Behavior Cloning ---")
    weights = clone_behavior(config.pipeline, dataset, config.clone, config.seed)
    loss = dataset_loss(weights, dataset)
    save_bundle(surrogate_dir(config), weights, metadata={
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "samples": len(dataset),
        "final_loss": loss,
    })

    logger.info("--- Phase 3: Frozen Baseline Check ---")
    results = evaluate_policy(config, weights, ScheduleOverride.FULL)
    report = {
        "mode": config.mode.value,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "eval_seeds": list(config.eval_seeds),
        "demo_samples": len(dataset),
        "demo_successes": dataset.successes,
        "final_loss": loss,
        "baseline": aggregate(results),
        "failures": failure_report(results),
    }
    write_json(Path(config.output_dir) / "clone_report.json", report)
    return report


def train_stage(config: ExperimentConfig, stage: int, seed: Optional[int] = None,
                features: Optional[ObservationFeatures] = None, output_dir: Optional[Path] = None,
                weights: Optional[SurrogateWeights] = None) -> SchedulerPolicy:
    """Train one stage and write its checkpoint plus training log; stage 2 starts from the stage-1 checkpoint."""
    seed = config.seed if seed is None else seed
    output_dir = Path(output_dir or config.output_dir)
    weights = weights or load_bundle(surrogate_dir(config))
    ppo = config.ppo.model_copy(update={
        "stage": stage,
        "observation_features": features or config.ppo.observation_features,
    })

    init_policy = None
    if stage == 2:
        init_policy = load_checkpoint(checkpoint_path(output_dir, 1)).to_policy()

    policy, state = train_scheduler(weights, ppo, config.reward, config.teacher, seed, init_policy)
    state.write_csv(output_dir / f"training_log_stage{stage}.csv")
    write_json(output_dir / f"training_failures_stage{stage}.json", {"failures": state.get_failure_report()})
    save_checkpoint(checkpoint_path(output_dir, stage), policy, stage, seed, config.config_hash(),
                    statistics=state.get_statistics())
    return policy


def run_eval(config: ExperimentConfig) -> Dict[str, Any]:
    override = config.override or ScheduleOverride.STAGE2
    output_dir = Path(config.output_dir)
    weights = load_bundle(surrogate_dir(config))
    policy = load_policy(output_dir, override)

    logger.info(f"🔎 Evaluating '{override.value}' on {len(config.eval_seeds)} seeds")
    results = evaluate_policy(config, weights, override, policy)

    report = {
        "mode": config.mode.value,
        "policy": override.value,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "eval_seeds": list(config.eval_seeds),
        "aggregate": aggregate(results, scheduler_flops(policy)),
        "per_seed": [seed_row(r) for r in results],
        "failures": failure_report(results),
    }
    write_json(output_dir / "report.json", report)
    write_table_csv(output_dir / "table.csv", report["per_seed"])
    for result in results:
        write_trace_csv(output_dir / f"trace_{result.seed}.csv", result.records)
    # Wall clock varies run to run, so it never enters report.json.
    write_json(output_dir / "timing.json", {override.value: timing_summary(results)})
    logger.info(f"✅ Report written to {output_dir / 'report.json'}")
    return report


def _comparison_row(name: str, results: List[EpisodeResult], training_seeds: Optional[List[int]] = None,
                    overhead: int = 0) -> Dict[str, Any]:
    summary = aggregate(results, overhead)
    return {
        "policy": name,
        "success_rate": summary["success_rate"],
        "speedup": summary["speedup"],
        "speedup_with_scheduler": summary["speedup_with_scheduler"],
        "mean_rho": summary["mean_rho"],
        "backbone_full_fraction": summary["per_level_fraction"]["backbone"][0],
        "head_full_fraction": summary["per_level_fraction"]["head"][0],
        "training_seeds": " ".join(str(s) for s in training_seeds) if training_seeds else "",
    }


def run_ablation(config: ExperimentConfig) -> Dict[str, Any]:
    """Fixed-policy comparison plus observation-ablated retrainings, in one table."""
    output_dir = Path(config.output_dir)
    weights = load_bundle(surrogate_dir(config))
    load_checkpoint(checkpoint_path(output_dir, 2))

    # 1. Policies evaluated from the existing checkpoints
    rows: List[Dict[str, Any]] = []
    timing: Dict[str, Any] = {}
    logger.info("--- Ablation 1: Execution Policies ---")
    for override in ABLATION_POLICIES:
        policy = load_policy(output_dir, override)
        results = evaluate_policy(config, weights, override, policy)
        rows.append(_comparison_row(override.value, results, overhead=scheduler_flops(policy)))
        timing[override.value] = timing_summary(results)

    # 2. Observation ablations: retrain both stages per training seed
    logger.info("--- Ablation 2: Scheduler Observations ---")
    training_seeds = list(config.ablation_training_seeds)
    per_seed: Dict[str, List[Dict[str, Any]]] = {}
    for features in ABLATION_FEATURES:
        name = f"stage2[{features.value}]"
        per_seed[name] = []
        pooled: List[EpisodeResult] = []
        for training_seed in training_seeds:
            run_dir = output_dir / "ablation" / features.value / f"seed{training_seed}"
            train_stage(config, 1, training_seed, features, run_dir, weights)
            policy = train_stage(config, 2, training_seed, features, run_dir, weights)
            results = evaluate_policy(config, weights, ScheduleOverride.STAGE2, policy)
            overhead = scheduler_flops(policy)
            row = _comparison_row(name, results, [training_seed], overhead)
            per_seed[name].append(row)
            pooled.extend(results)
        summary = _comparison_row(name, pooled, training_seeds, overhead)
        # Averaged over training seeds rather than pooled.
        summary["success_rate"] = float(np.mean([r["success_rate"] for r in per_seed[name]]))
        summary["speedup"] = float(np.mean([r["speedup"] for r in per_seed[name]]))
        summary["speedup_with_scheduler"] = float(np.mean([r["speedup_with_scheduler"] for r in per_seed[name]]))
        rows.append(summary)

    report = {
        "mode": config.mode.value,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "eval_seeds": list(config.eval_seeds),
        "training_seeds": training_seeds,
        "comparison": rows,
        "observation_runs": per_seed,
    }
    write_json(output_dir / "ablation.json", report)
    write_table_csv(output_dir / "ablation.csv", rows)
    write_json(output_dir / "ablation_timing.json", timing)
    logger.info(f"✅ Ablation table written to {output_dir / 'ablation.csv'}")
    return report


def run_diagnose(config: ExperimentConfig) -> Dict[str, Any]:
    """Per-step traces and SVG timelines, with the unscheduled first/last-layer CKA alongside."""
    override = config.override or ScheduleOverride.STAGE2
    output_dir = Path(config.output_dir)
    weights = load_bundle(surrogate_dir(config))
    policy = load_policy(output_dir, override)
    table = component_flops(weights.config)

    episodes = []
    for seed in config.diagnose_seeds:
        result = evaluate_seed(EvalJob(seed, override, weights, policy, config.reward, config.teacher,
                                       table, shadow=True))
        trace = write_trace_csv(output_dir / f"trace_{seed}.csv", result.records)
        svg = write_timeline_svg(output_dir / f"timeline_{seed}.svg", result.records,
                                 title=f"{override.value} | seed {seed} | {result.reason}")

        episodes.append({
            "seed": seed,
            "success": result.success,
            "reason": result.reason,
            "steps": result.steps,
            "speedup": result.speedup,
            **phase_usage(result.records, config.teacher.rho_thresholds[-1]),
            "expert_similarity": expert_phase_similarity(weights, seed),
            "trace": trace.name,
            "timeline": svg.name,
        })

    report = {
        "mode": config.mode.value,
        "policy": override.value,
        "config_hash": config.config_hash(),
        "diagnose_seeds": list(config.diagnose_seeds),
        "episodes": episodes,
    }
    write_json(output_dir / "diagnose.json", report)
    return report
