"""
Scheduled inference: backbone compute ladder, action-head reuse ladder, caches.
"""

from .caches import BackboneCache, ExecutorCaches, HeadCache
from .engine import (
    SKIP_LEVELS,
    BackboneOutcome,
    HeadOutcome,
    PhaseExecutor,
    StepOutcome,
    backbone_components,
    exec_backbone,
    exec_head,
    exec_step,
    head_components,
    reused_steps,
    skip_horizon,
)

__all__ = [
    "BackboneCache",
    "ExecutorCaches",
    "HeadCache",
    "SKIP_LEVELS",
    "BackboneOutcome",
    "HeadOutcome",
    "PhaseExecutor",
    "StepOutcome",
    "backbone_components",
    "exec_backbone",
    "exec_head",
    "exec_step",
    "head_components",
    "reused_steps",
    "skip_horizon",
]
