"""
Scheduled inference engine.

Backbone ladder (level -> what runs):
    0  encoder + all L layers; refreshes anchor, cached output, intermediates
    1  encoder + first and last layer; last layer sees u_{L-1} + (h1 - h1_bar)
    j  (2, 3, 4) nothing; cached output reused for j-1 steps, the decision step included

Head ladder (level -> refinement steps replayed from cache):
    0  none
    1  1 .. M-2
    2  1 .. M-1

Recomputed refinement steps always refresh their cached delta.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from models import FULL_COMPUTE, ComputeAction, EnvState, ObservationFrame, RobotAction
from models.errors import RejectedInputError, RejectedStateError
from envsim import robot_state_vector
from signals import cka
from surrogate.pipeline import (
    SurrogateWeights,
    backbone_full,
    backbone_layer,
    decode,
    encode,
    head_step,
    initial_action_state,
    pool,
)
from costmodel import (
    CostTable,
    FlopsLedger,
    backbone_components,
    component_flops,
    head_components,
    reused_steps,
)
from .caches import BackboneCache, ExecutorCaches, HeadCache

logger = logging.getLogger(__name__)

SKIP_LEVELS = (2, 3, 4)


def skip_horizon(level: int) -> int:
    """Steps that reuse the cached output after choosing `level` (decision step included)."""
    return level - 1 if level in SKIP_LEVELS else 0


# --- Backbone -----------------------------------------------------------

@dataclass
class BackboneOutcome:
    z: np.ndarray
    rho: float
    cache: BackboneCache
    components: List[str]
    probed: bool                                 # rho was recomputed this step
    first_layer: Optional[np.ndarray] = None     # fresh first-layer output, when one ran
    last_layer: Optional[np.ndarray] = None      # fresh final hidden matrix, when one ran


def exec_backbone(level: int, obs: ObservationFrame, cache: BackboneCache,
                  weights: SurrogateWeights) -> BackboneOutcome:
    config = weights.config
    if cache.in_skip_window:
        raise RejectedStateError(
            f"Backbone level {level} requested inside a skip window ({cache.skip_remaining} steps left)")

    if level == 0:
        trace = backbone_full(config, weights, encode(config, weights, obs))
        h1 = trace.hidden[1]
        rho = 1.0 if cache.anchor is None else cka(h1, cache.anchor)
        new_cache = BackboneCache(
            anchor=h1, z_bar=trace.z, intermediates=trace.hidden[1:config.depth],
            first_layer=h1, skip_remaining=0, skip_level=0, rho=rho,
        )
        return BackboneOutcome(trace.z, rho, new_cache, backbone_components(0, config.depth), True,
                               first_layer=h1, last_layer=trace.hidden[-1])

    if level == 1:
        if cache.intermediates is None or cache.first_layer is None or cache.anchor is None:
            raise RejectedStateError("Level 1 needs cached intermediates from a full pass")
        h1 = backbone_layer(config, weights, 1, encode(config, weights, obs))
        rho = cka(h1, cache.anchor)
        last_input = cache.intermediates[-1] + (h1 - cache.first_layer)
        h_last = backbone_layer(config, weights, config.depth, last_input)
        z = pool(h_last)
        new_cache = replace(cache, z_bar=z, rho=rho)
        return BackboneOutcome(z, rho, new_cache, backbone_components(1, config.depth), True,
                               first_layer=h1, last_layer=h_last)

    if level in SKIP_LEVELS:
        if cache.z_bar is None:
            raise RejectedStateError(f"Level {level} needs a cached output")
        new_cache = replace(cache, skip_remaining=skip_horizon(level), skip_level=level)
        return BackboneOutcome(cache.z_bar, cache.rho, new_cache, [], False)

    raise RejectedInputError(f"Backbone level must be in 0..4, got {level}")


# --- Action head --------------------------------------------------------

@dataclass
class HeadOutcome:
    actions: List[RobotAction]
    cache: HeadCache
    components: List[str]
    states: List[np.ndarray]


def exec_head(level: int, z: np.ndarray, s: np.ndarray, cache: HeadCache,
              weights: SurrogateWeights) -> HeadOutcome:
    config = weights.config
    steps = config.refinement_steps
    reused = reused_steps(level, steps)
    if reused and cache.empty:
        raise RejectedStateError(f"Head level {level} needs cached refinement deltas")

    x = initial_action_state(config)
    states = [x]
    fresh = {}
    for m in range(steps):
        if m in reused:
            delta = cache.deltas[m]
        else:
            delta = head_step(config, weights, m, x, z, s)
            fresh[m] = delta
        x = x + delta
        states.append(x)

    return HeadOutcome(decode(config, weights, x), cache.with_deltas(fresh, steps),
                       head_components(level, steps), states)


# --- One control step ---------------------------------------------------

@dataclass
class StepOutcome:
    actions: List[RobotAction]
    requested: ComputeAction
    executed: ComputeAction
    caches: ExecutorCaches
    rho: float
    probed: bool
    z: np.ndarray
    components: List[str]
    forced_backbone: bool = False    # skip window continuation or cold start
    step_cost: Optional[float] = None
    first_layer: Optional[np.ndarray] = None
    last_layer: Optional[np.ndarray] = None
    head_states: List[np.ndarray] = field(default_factory=list)

    @property
    def skip_remaining(self) -> int:
        return self.caches.backbone.skip_remaining


def exec_step(action: ComputeAction, obs: ObservationFrame, env_state: EnvState,
              caches: ExecutorCaches, weights: SurrogateWeights) -> StepOutcome:
    """
    Compose one backbone and one head execution. Inside a skip window the
    requested backbone level is replaced by a continuation of the window;
    on a cold start both levels are replaced by full compute.
    """
    config = weights.config
    backbone = caches.backbone
    forced = False

    if backbone.in_skip_window:
        # 1. Continue the open window: no backbone compute, cached output reused
        new_backbone = backbone.consume_skip()
        bb = BackboneOutcome(backbone.z_bar, backbone.rho, new_backbone, [], False)
        backbone_level = backbone.skip_level
        forced = True
    else:
        backbone_level = action.backbone
        if backbone.empty and backbone_level != 0:
            backbone_level, forced = 0, True
        # 2. Run the chosen ladder level; a new window counts the decision step as its first
        bb = exec_backbone(backbone_level, obs, backbone, weights)
        if backbone_level in SKIP_LEVELS:
            bb.cache = bb.cache.consume_skip()

    head_level = 0 if caches.head.empty else action.head
    head = exec_head(head_level, bb.z, robot_state_vector(env_state), caches.head, weights)

    executed = ComputeAction(backbone=backbone_level, head=head_level)
    logger.debug(f"step {env_state.step_index}: requested {action} executed {executed} rho={bb.rho:.4f}")
    return StepOutcome(
        actions=head.actions, requested=action, executed=executed,
        caches=ExecutorCaches(backbone=bb.cache, head=head.cache),
        rho=bb.rho, probed=bb.probed, z=bb.z, components=bb.components + head.components,
        forced_backbone=forced, first_layer=bb.first_layer, last_layer=bb.last_layer,
        head_states=head.states,
    )


class PhaseExecutor:
    """One episode's executor: caches plus a FLOPs ledger."""

    def __init__(self, weights: SurrogateWeights, table: Optional[CostTable] = None):
        self.weights = weights
        self.table = table or component_flops(weights.config)
        self.reset()

    def reset(self):
        self.caches = ExecutorCaches()
        self.ledger = FlopsLedger(self.table)

    @property
    def backbone_cache(self) -> BackboneCache:
        return self.caches.backbone

    @property
    def rho(self) -> float:
        return self.caches.backbone.rho

    def step(self, action: ComputeAction, obs: ObservationFrame, env_state: EnvState) -> StepOutcome:
        outcome = exec_step(action, obs, env_state, self.caches, self.weights)
        outcome.step_cost = self.ledger.record_step(outcome.components, outcome.executed)
        self.caches = outcome.caches
        return outcome

    def full_step(self, obs: ObservationFrame, env_state: EnvState) -> StepOutcome:
        return self.step(FULL_COMPUTE, obs, env_state)
