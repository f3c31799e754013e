"""
Training State Management.

This module acts as the 'Memory' of the trainer. It tracks:
1. One row per PPO update (reward, speedup, success, losses).
2. Episode outcomes, so failures can be reported by terminal reason.
3. The divergence watch against the random-schedule baseline.
"""

import csv
from collections import defaultdict
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Optional


@dataclass
class UpdateRecord:
    update: int
    stage: int
    episodes: int
    steps: int
    mean_reward: float
    mean_speedup: float
    success_rate: float
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    grad_norm: float


@dataclass
class EpisodeOutcome:
    update: int
    seed: int
    success: bool
    reason: str
    total_reward: float
    speedup: float


class TrainingState:
    """Mutable record of one scheduler training run."""

    def __init__(self, stage: int, seed: int):
        self.stage = stage
        self.seed = seed
        self.updates: List[UpdateRecord] = []
        self.episodes: List[EpisodeOutcome] = []
        self.baseline_reward: Optional[float] = None
        self.below_baseline_streak = 0

    def record_episode(self, outcome: EpisodeOutcome) -> None:
        self.episodes.append(outcome)

    def record_update(self, record: UpdateRecord) -> None:
        """Commit one update row and advance the divergence watch."""
        self.updates.append(record)
        if self.baseline_reward is not None and record.mean_reward < self.baseline_reward:
            self.below_baseline_streak += 1
        else:
            self.below_baseline_streak = 0

    # --- Reporting ---

    def get_statistics(self) -> Dict[str, Any]:
        if not self.updates:
            return {"updates": 0, "stage": self.stage, "seed": self.seed, "baseline_reward": self.baseline_reward}
        last = self.updates[-1]
        best = max(self.updates, key=lambda r: r.mean_reward)
        return {
            "updates": len(self.updates),
            "stage": self.stage,
            "seed": self.seed,
            "episodes": len(self.episodes),
            "baseline_reward": self.baseline_reward,
            "final_mean_reward": last.mean_reward,
            "final_success_rate": last.success_rate,
            "final_mean_speedup": last.mean_speedup,
            "best_update": best.update,
            "best_mean_reward": best.mean_reward,
        }

    def get_failure_report(self) -> List[Dict]:
        """Failed training episodes grouped by terminal reason, most frequent first."""
        by_reason: Dict[str, List[EpisodeOutcome]] = defaultdict(list)
        for ep in self.episodes:
            if not ep.success:
                by_reason[ep.reason].append(ep)
        report = [{
            "reason": reason,
            "count": len(eps),
            "first_update": min(e.update for e in eps),
            "last_update": max(e.update for e in eps),
            "sample_seeds": [e.seed for e in eps[:5]],
        } for reason, eps in by_reason.items()]
        report.sort(key=lambda x: (-x["count"], x["reason"]))
        return report

    def write_csv(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=[f.name for f in fields(UpdateRecord)])
            writer.writeheader()
            for record in self.updates:
                writer.writerow(asdict(record))
