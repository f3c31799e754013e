"""
Frozen surrogate vision-language-action pipeline and its cloning trainer.
"""

from .pipeline import (
    BackboneTrace,
    HeadTrace,
    SurrogateWeights,
    UnscheduledPolicy,
    backbone_full,
    backbone_layer,
    decode,
    encode,
    forward_on_tape,
    head_full,
    head_step,
    init_weights,
    pool,
    predict_normalized,
    zero_weights,
)
from .cloning import BehaviorCloner, clone_behavior, dataset_loss
from .bundle import BundleManifest, load_bundle, read_manifest, save_bundle

__all__ = [
    "BackboneTrace",
    "HeadTrace",
    "SurrogateWeights",
    "UnscheduledPolicy",
    "backbone_full",
    "backbone_layer",
    "decode",
    "encode",
    "forward_on_tape",
    "head_full",
    "head_step",
    "init_weights",
    "pool",
    "predict_normalized",
    "zero_weights",
    "BehaviorCloner",
    "clone_behavior",
    "dataset_loss",
    "BundleManifest",
    "load_bundle",
    "read_manifest",
    "save_bundle",
]
