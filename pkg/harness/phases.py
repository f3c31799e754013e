"""
Representation similarity along the scripted expert's own trajectory.

Consecutive-step CKA of the first and last backbone layer, computed on an
unscheduled full pass every step, split by movement phase: pairs where the
object is carried on both steps (transport) and the single pair straddling
the grasp latch.
"""

import logging
from typing import Any, Dict, List, Optional

import numpy as np

from envsim import expert_action, reset, step
from signals import cka
from surrogate import SurrogateWeights, backbone_full, encode

logger = logging.getLogger(__name__)


def _mean(values: List[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def expert_phase_similarity(weights: SurrogateWeights, seed: int) -> Dict[str, Any]:
    config = weights.config
    state, frame = reset(seed)
    prev_state = state
    prev = backbone_full(config, weights, encode(config, weights, frame))

    transport: Dict[str, List[float]] = {"first": [], "last": []}
    latch: Dict[str, List[float]] = {"first": [], "last": []}
    while not state.done:
        state, frame, _, _ = step(state, expert_action(state))
        trace = backbone_full(config, weights, encode(config, weights, frame))
        if prev_state.holding and state.holding:
            bucket = transport
        elif state.holding and not prev_state.holding:
            bucket = latch
        else:
            bucket = None
        if bucket is not None:
            bucket["first"].append(cka(trace.hidden[1], prev.hidden[1]))
            bucket["last"].append(cka(trace.hidden[-1], prev.hidden[-1]))
        prev_state, prev = state, trace

    if not latch["first"]:
        logger.warning(f"⚠️ Expert never grasped on seed {seed}; no transition pair")
    return {
        "seed": seed,
        "steps": state.step_index,
        "transport_pairs": len(transport["first"]),
        "transport_cka_first": _mean(transport["first"]),
        "transport_cka_last": _mean(transport["last"]),
        "grasp_transition_cka_first": _mean(latch["first"]),
        "grasp_transition_cka_last": _mean(latch["last"]),
    }
