"""
Configuration models.

Every experiment is driven by one ExperimentConfig that nests the
per-module configs below. All fields carry defaults, so an empty JSON
object is a valid configuration.
"""

import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import RejectedInputError


class PipelineConfig(BaseModel):
    """Shape of the frozen surrogate VLA pipeline."""

    model_config = ConfigDict(frozen=True)

    tokens: int = Field(default=8, ge=2, description="Token count T")
    hidden: int = Field(default=32, ge=1, description="Hidden width d")
    depth: int = Field(default=6, ge=3, description="Backbone depth L (first and last layer plus >= 1 middle)")
    refinement_steps: int = Field(default=4, ge=3, description="Action-head refinement steps M")
    chunk: int = Field(default=1, ge=1, le=1, description="Action chunk length K (fixed to 1)")
    head_hidden: int = Field(default=32, ge=1, description="Hidden width of each refinement block")
    action_state: int = Field(default=4, ge=1, description="Dimension A of the refinement state x^m")


class CloneConfig(BaseModel):
    """Behavior-cloning schedule for building the frozen surrogate."""

    episodes: int = Field(default=200, ge=1, description="Expert episodes collected")
    epochs: int = Field(default=60, ge=1)
    batch_size: int = Field(default=256, ge=1)
    learning_rate: float = Field(default=3e-3, ge=0.0)
    final_learning_rate: float = Field(default=3e-4, ge=0.0, description="Linear decay target")
    perturbation_std: float = Field(default=0.1, ge=0.0, description="Executed motion noise, fraction of the clip bounds")
    init_scale: float = Field(default=0.5, gt=0.0)


class RewardConfig(BaseModel):
    """Reward weights. Defaults are artifact choices, not measured values."""

    model_config = ConfigDict(frozen=True)

    lambda_cost: float = Field(default=0.1, ge=0.0, description="lambda_C on normalized step FLOPs")
    lambda_backbone: float = Field(default=0.05, ge=0.0, description="lambda_B teacher disagreement")
    lambda_head: float = Field(default=0.05, ge=0.0, description="lambda_H teacher disagreement")
    lambda_reuse: float = Field(default=0.01, ge=0.0, description="lambda_R reuse-horizon penalty")
    success_bonus: float = Field(default=10.0, ge=0.0)
    progress_weight: float = Field(default=0.05, ge=0.0, description="Dense distance-decrease shaping")


class ObservationFeatures(str, Enum):
    """Which scheduler inputs are visible (progress is always kept)."""
    ALL = "all"
    CKA_PROGRESS = "cka+progress"
    SPEED_PROGRESS = "speed+progress"


class PpoConfig(BaseModel):
    """Maskable PPO hyperparameters."""

    model_config = ConfigDict(frozen=True)

    hidden: Tuple[int, ...] = Field(default=(64, 64), description="Policy/value hidden widths (tanh)")
    clip_epsilon: float = Field(default=0.2, gt=0.0)
    gamma: float = Field(default=0.99, gt=0.0, le=1.0)
    gae_lambda: float = Field(default=0.95, ge=0.0, le=1.0)
    epochs: int = Field(default=4, ge=1, description="Optimization epochs per update")
    minibatch_size: int = Field(default=256, ge=1)
    learning_rate: float = Field(default=3e-4, ge=0.0)
    entropy_coef: float = Field(default=0.01, ge=0.0)
    value_coef: float = Field(default=0.5, ge=0.0)
    max_grad_norm: float = Field(default=0.5, gt=0.0)
    episodes_per_update: int = Field(default=8, ge=1)
    updates: int = Field(default=40, ge=1)
    stage: int = Field(default=1, ge=1, le=2)
    observation_features: ObservationFeatures = ObservationFeatures.ALL
    divergence_patience: int = Field(default=10, ge=1)


class TeacherConfig(BaseModel):
    """Rule-guided thresholds. Values are artifact defaults."""

    model_config = ConfigDict(frozen=True)

    rho_thresholds: Tuple[float, float, float, float] = Field(
        default=(0.995, 0.99, 0.97, 0.90),
        description="rho cutoffs mapping to backbone levels 4, 3, 2, 1 (else 0)",
    )
    head_fast_trans: float = Field(default=0.03, description="v_trans above this (with a still gripper) -> head level 2")
    head_still_grip: float = Field(default=0.01, description="v_grip below this counts as a still gripper")
    head_slow_trans: float = Field(default=0.01, description="v_trans above this -> head level 1")

    @field_validator('rho_thresholds')
    @classmethod
    def validate_descending(cls, v):
        if any(a <= b for a, b in zip(v, v[1:])):
            raise ValueError("rho thresholds must be strictly descending")
        return v

    @model_validator(mode='after')
    def validate_speed_cutoffs(self):
        if self.head_fast_trans <= self.head_slow_trans:
            raise ValueError("head speed cutoffs must be strictly descending")
        return self


class Mode(str, Enum):
    CLONE = "clone"
    TRAIN_STAGE1 = "train-stage1"
    TRAIN_STAGE2 = "train-stage2"
    EVAL = "eval"
    ABLATE = "ablate"
    DIAGNOSE = "diagnose"


class ScheduleOverride(str, Enum):
    """Fixed policies the harness can evaluate."""
    FULL = "full"
    THRESHOLD = "threshold"
    STAGE1 = "stage1"
    STAGE2 = "stage2"
    FORCE_LLM_FULL = "force-llm-full"
    FORCE_AH_FULL = "force-ah-full"
    RANDOM = "random"


class ExperimentConfig(BaseModel):
    """Top-level experiment description, loaded from one JSON file plus CLI overrides."""

    mode: Mode = Mode.EVAL
    seed: int = Field(default=0, description="Master seed for cloning and scheduler training")
    eval_seeds: List[int] = Field(default_factory=lambda: list(range(1000, 1100)))
    diagnose_seeds: List[int] = Field(default_factory=lambda: [1000])
    ablation_training_seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    override: Optional[ScheduleOverride] = None
    output_dir: Path = Path("runs/default")
    workers: int = Field(default=1, ge=1, description="Concurrent evaluation workers")

    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)
    clone: CloneConfig = Field(default_factory=CloneConfig)
    ppo: PpoConfig = Field(default_factory=PpoConfig)
    reward: RewardConfig = Field(default_factory=RewardConfig)
    teacher: TeacherConfig = Field(default_factory=TeacherConfig)

    @field_validator('eval_seeds', 'diagnose_seeds', 'ablation_training_seeds')
    @classmethod
    def validate_seed_set(cls, v):
        if not v:
            raise ValueError("Seed sets must be nonempty")
        if len(set(v)) != len(v):
            raise ValueError("Seed sets must not repeat seeds")
        return v

    @classmethod
    def from_file(cls, path: Path, **overrides) -> "ExperimentConfig":
        """Load a JSON config; `overrides` replace top-level keys before validation."""
        path = Path(path)
        if not path.is_file():
            raise RejectedInputError(f"Config file not found: {path}")
        with open(path, 'r') as f:
            payload = json.load(f)
        if not isinstance(payload, dict):
            raise RejectedInputError(f"Config file {path} must hold a JSON object")
        return cls.model_validate({**payload, **overrides})

    def config_hash(self) -> str:
        """SHA-256 over the canonical JSON form; output_dir and workers do not affect results."""
        payload = self.model_dump(mode='json', exclude={'output_dir', 'workers'})
        blob = json.dumps(payload, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(blob.encode()).hexdigest()
