"""
Closed-form FLOPs cost model and per-episode ledgers.
"""

from .ledger import (
    ENCODER,
    PROBE,
    READOUT,
    CostTable,
    FlopsLedger,
    backbone_components,
    component_flops,
    dense_flops,
    net_flops,
    head_components,
    head_name,
    ladder_sets,
    layer_name,
    record_step,
    reused_steps,
    speedup,
)

__all__ = [
    "ENCODER",
    "PROBE",
    "READOUT",
    "CostTable",
    "FlopsLedger",
    "backbone_components",
    "component_flops",
    "dense_flops",
    "net_flops",
    "head_components",
    "head_name",
    "ladder_sets",
    "layer_name",
    "record_step",
    "reused_steps",
    "speedup",
]
