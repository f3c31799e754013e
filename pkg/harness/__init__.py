"""
Experiment drivers, report writers and the SVG timeline.
"""

from .experiments import run_ablation, run_clone, run_diagnose, run_eval, train_stage
from .timeline import write_timeline_svg

__all__ = [
    "run_ablation",
    "run_clone",
    "run_diagnose",
    "run_eval",
    "train_stage",
    "write_timeline_svg",
]
