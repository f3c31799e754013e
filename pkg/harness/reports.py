"""
Report writers and the aggregation shared by every evaluation mode.

Aggregates are computed from the same StepRecord rows that go into the
per-step trace CSVs, so a report can be recomputed from its traces.
"""

import csv
import json
import logging
from collections import defaultdict
from functools import reduce
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from models import BACKBONE_LEVELS, HEAD_LEVELS
from scheduler.rollout import EpisodeResult, StepRecord

logger = logging.getLogger(__name__)


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(payload, f, indent=2, sort_keys=True)
    return path


def write_table_csv(path: Path, rows: Sequence[Dict[str, Any]], columns: Sequence[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c) for c in columns})
    return path


def write_trace_csv(path: Path, records: Iterable[StepRecord]) -> Path:
    return write_table_csv(path, [r.as_row() for r in records], StepRecord.columns())


def trace_speedup(records: Sequence[StepRecord]) -> float:
    """Steps over summed normalized cost; equals the ledger speedup of the same steps."""
    return len(records) / float(sum(r.step_cost for r in records))


def level_histogram(records: Iterable[StepRecord]) -> Dict[str, List[int]]:
    backbone, head = [0] * BACKBONE_LEVELS, [0] * HEAD_LEVELS
    for r in records:
        backbone[r.backbone] += 1
        head[r.head] += 1
    return {"backbone": backbone, "head": head}


def seed_row(result: EpisodeResult) -> Dict[str, Any]:
    hist = level_histogram(result.records)
    row = {
        "seed": result.seed,
        "policy": result.schedule,
        "success": result.success,
        "reason": result.reason,
        "steps": result.steps,
        "speedup": trace_speedup(result.records),
        "mean_rho": result.mean_rho,
    }
    for level, count in enumerate(hist["backbone"]):
        row[f"backbone_l{level}"] = count
    for level, count in enumerate(hist["head"]):
        row[f"head_l{level}"] = count
    return row


def aggregate(results: Sequence[EpisodeResult], scheduler_flops: int = 0) -> Dict[str, Any]:
    """
    Seed-ordered reduce: success rate, pooled FLOPs speedup, level usage and mean rho.
    `scheduler_flops` is the policy net's per-step forward cost; it only enters
    `speedup_with_scheduler`.
    """
    records = [r for result in results for r in result.records]
    hist = level_histogram(records)
    steps = len(records)
    pooled = reduce(lambda a, b: a.merge(b), (r.ledger for r in results))
    return {
        "episodes": len(results),
        "steps": steps,
        "success_rate": float(np.mean([r.success for r in results])),
        "speedup": trace_speedup(records),
        "speedup_with_scheduler": pooled.speedup_with_overhead(scheduler_flops),
        "mean_episode_speedup": float(np.mean([trace_speedup(r.records) for r in results])),
        "mean_rho": float(np.mean([r.rho for r in records])),
        "per_level_histogram": hist,
        "per_level_fraction": {
            part: [count / steps for count in counts] for part, counts in hist.items()
        },
    }


def failure_report(results: Sequence[EpisodeResult]) -> List[Dict[str, Any]]:
    """Failed seeds grouped by terminal reason, most frequent first."""
    by_reason: Dict[str, List[int]] = defaultdict(list)
    for result in results:
        if not result.success:
            by_reason[result.reason].append(result.seed)
    report = [{"reason": reason, "count": len(seeds), "seeds": seeds} for reason, seeds in by_reason.items()]
    report.sort(key=lambda x: (-x["count"], x["reason"]))
    return report


def timing_summary(results: Sequence[EpisodeResult]) -> Dict[str, float]:
    latency = float(np.mean([r.latency_ms for r in results]))
    return {"mean_step_latency_ms": latency, "frequency_hz": 1000.0 / latency if latency > 0 else None}


def phase_usage(records: Sequence[StepRecord], rho_floor: float) -> Dict[str, Any]:
    """Full-backbone rate over all steps and over the steps whose rho fell below `rho_floor`."""
    low = [r for r in records if r.rho < rho_floor]
    return {
        "backbone_full_rate": float(np.mean([r.backbone == 0 for r in records])) if records else None,
        "low_rho_steps": len(low),
        "low_rho_backbone_full_rate": float(np.mean([r.backbone == 0 for r in low])) if low else None,
    }
