"""
Scheduler checkpoints: policy and value nets as DenseNet documents, tagged
with stage, seed and the experiment config hash.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Literal

from pydantic import BaseModel, Field

from models import ObservationFeatures
from models.errors import MissingCheckpointError
from numerics import DenseNetDocument
from .policy import SchedulerPolicy

logger = logging.getLogger(__name__)


class SchedulerCheckpoint(BaseModel):
    format_version: Literal[1] = 1
    stage: int = Field(ge=1, le=2)
    seed: int
    config_hash: str
    observation_features: ObservationFeatures = ObservationFeatures.ALL
    policy: DenseNetDocument
    value: DenseNetDocument
    statistics: Dict[str, Any] = Field(default_factory=dict)

    def to_policy(self) -> SchedulerPolicy:
        return SchedulerPolicy(self.policy.to_net(), self.value.to_net(), self.observation_features)


def save_checkpoint(path: Path, policy: SchedulerPolicy, stage: int, seed: int, config_hash: str,
                    statistics: Dict[str, Any] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ckpt = SchedulerCheckpoint(
        stage=stage, seed=seed, config_hash=config_hash, observation_features=policy.features,
        policy=DenseNetDocument.from_net(policy.policy_net),
        value=DenseNetDocument.from_net(policy.value_net),
        statistics=statistics or {},
    )
    with open(path, 'w') as f:
        json.dump(ckpt.model_dump(mode='json'), f, indent=2, sort_keys=True)
    logger.info(f"💾 Stage-{stage} checkpoint written to {path}")
    return path


def load_checkpoint(path: Path) -> SchedulerCheckpoint:
    path = Path(path)
    if not path.exists():
        raise MissingCheckpointError(f"No scheduler checkpoint at {path}")
    with open(path) as f:
        return SchedulerCheckpoint.model_validate(json.load(f))
