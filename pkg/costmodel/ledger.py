"""
Analytic FLOPs accounting.

Each dense layer costs 2 * in * out (multiply-adds counted twice; biases and
activations ignored). A CostTable holds the closed-form cost of every
pipeline component; a FlopsLedger records which components ran on each
control step of one episode.
"""

import logging
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from models import ACTION_SIZE, BACKBONE_LEVELS, HEAD_LEVELS, OBSERVATION_SIZE, ROBOT_STATE_SIZE, ComputeAction, PipelineConfig
from models.errors import RejectedInputError, RejectedStateError

logger = logging.getLogger(__name__)

ENCODER = "encoder"
PROBE = "probe"
READOUT = "readout"


def layer_name(layer: int) -> str:
    return f"layer.{layer}"


def head_name(m: int) -> str:
    return f"head.{m}"


def dense_flops(n_in: int, n_out: int, rows: int = 1) -> int:
    return 2 * rows * n_in * n_out


class CostTable(BaseModel):
    """Static per-component costs and the full-step reference."""

    model_config = ConfigDict(frozen=True)

    components: Dict[str, int] = Field(description="Component name -> FLOPs per execution")
    full_step: int = Field(gt=0, description="Cost of a (0,0) step: every component once")

    @model_validator(mode='before')
    @classmethod
    def default_full_step(cls, data):
        if isinstance(data, dict) and 'full_step' not in data and 'components' in data:
            data = {**data, 'full_step': sum(data['components'].values())}
        return data

    @model_validator(mode='after')
    def validate_reference(self):
        if any(v < 0 for v in self.components.values()):
            raise ValueError("Component costs must be non-negative")
        if self.full_step != sum(self.components.values()):
            raise ValueError("full_step must equal the sum of all component costs")
        return self

    def cost_of(self, components: Iterable[str]) -> int:
        names = list(components)
        if len(set(names)) != len(names):
            raise RejectedInputError(f"Component listed twice in {names}")
        unknown = [n for n in names if n not in self.components]
        if unknown:
            raise RejectedInputError(f"Unknown components {unknown}")
        return sum(self.components[n] for n in names)


def net_flops(sizes: Sequence[int]) -> int:
    """Forward cost of a dense stack with the given layer sizes."""
    return sum(dense_flops(n_in, n_out) for n_in, n_out in zip(sizes[:-1], sizes[1:]))


def component_flops(config: PipelineConfig) -> CostTable:
    t, d = config.tokens, config.hidden
    a, h, m = config.action_state, config.head_hidden, config.refinement_steps
    costs = {ENCODER: dense_flops(OBSERVATION_SIZE, d)}
    for layer in range(1, config.depth + 1):
        costs[layer_name(layer)] = dense_flops(3 * d, d, rows=t)
    # Probe: Yc^T Xc plus the two self-products, each T x d by T x d.
    costs[PROBE] = 3 * dense_flops(d, d, rows=t)
    head_in = a + d + ROBOT_STATE_SIZE + m
    for step in range(m):
        costs[head_name(step)] = dense_flops(head_in, h) + dense_flops(h, a)
    costs[READOUT] = dense_flops(a, ACTION_SIZE * config.chunk)
    return CostTable(components=costs)


# --- Ladder component sets ------------------------------------------------

def reused_steps(level: int, steps: int) -> Set[int]:
    """R(level): refinement steps whose update is replayed from the cache."""
    if level == 0:
        return set()
    if level == 1:
        return set(range(1, steps - 1))
    if level == 2:
        return set(range(1, steps))
    raise RejectedInputError(f"Head level must be 0, 1 or 2, got {level}")


def backbone_components(level: int, depth: int) -> List[str]:
    if level == 0:
        return [ENCODER] + [layer_name(i) for i in range(1, depth + 1)] + [PROBE]
    if level == 1:
        return [ENCODER, layer_name(1), layer_name(depth), PROBE]
    return []


def head_components(level: int, steps: int) -> List[str]:
    reused = reused_steps(level, steps)
    return [head_name(m) for m in range(steps) if m not in reused] + [READOUT]


def ladder_sets(table: CostTable) -> Dict[Tuple[int, int], FrozenSet[str]]:
    """Executed component set of every (backbone, head) level pair the table can express."""
    depth = sum(name.startswith("layer.") for name in table.components)
    steps = sum(name.startswith("head.") for name in table.components)
    return {
        (b, h): frozenset(backbone_components(b, depth) + head_components(h, steps))
        for b in range(BACKBONE_LEVELS) for h in range(HEAD_LEVELS)
    }


class FlopsLedger:
    """Per-episode record of executed components. Merging is associative."""

    def __init__(self, table: CostTable):
        self.table = table
        self.step_costs: List[int] = []
        self.component_totals: Dict[str, int] = {name: 0 for name in table.components}
        self.backbone_levels = [0] * BACKBONE_LEVELS
        self.head_levels = [0] * HEAD_LEVELS
        self.ladder = ladder_sets(table)

    def record_step(self, components: Iterable[str], action: Optional[ComputeAction] = None) -> float:
        """Append one step; returns its normalized cost in [0, 1]."""
        names = list(components)
        cost = self.table.cost_of(names)
        executed = frozenset(names)
        if action is not None:
            if executed != self.ladder[(action.backbone, action.head)]:
                raise RejectedInputError(
                    f"Components {sorted(names)} do not match ladder levels ({action.backbone}, {action.head})")
        elif executed not in self.ladder.values():
            raise RejectedInputError(f"Components {sorted(names)} match no ladder level pair")
        for name in names:
            self.component_totals[name] += self.table.components[name]
        self.step_costs.append(cost)
        if action is not None:
            self.backbone_levels[action.backbone] += 1
            self.head_levels[action.head] += 1
        return cost / self.table.full_step

    @property
    def steps(self) -> int:
        return len(self.step_costs)

    @property
    def total_cost(self) -> int:
        return sum(self.step_costs)

    def normalized_costs(self) -> List[float]:
        return [c / self.table.full_step for c in self.step_costs]

    def speedup(self) -> float:
        if not self.step_costs:
            raise RejectedStateError("Speedup is undefined for an empty ledger")
        if self.total_cost == 0:
            raise RejectedStateError("Speedup is undefined when no compute was recorded")
        return self.steps * self.table.full_step / self.total_cost

    def speedup_with_overhead(self, overhead_per_step: int) -> float:
        """Speedup after charging a fixed per-step cost (the scheduler net) outside the reference."""
        if overhead_per_step < 0:
            raise RejectedInputError("Overhead must be non-negative")
        if not self.step_costs:
            raise RejectedStateError("Speedup is undefined for an empty ledger")
        return self.steps * self.table.full_step / (self.total_cost + self.steps * overhead_per_step)

    def merge(self, other: "FlopsLedger") -> "FlopsLedger":
        if other.table != self.table:
            raise RejectedInputError("Cannot merge ledgers built on different cost tables")
        merged = FlopsLedger(self.table)
        merged.step_costs = self.step_costs + other.step_costs
        merged.component_totals = {k: self.component_totals[k] + other.component_totals[k]
                                   for k in self.component_totals}
        merged.backbone_levels = [a + b for a, b in zip(self.backbone_levels, other.backbone_levels)]
        merged.head_levels = [a + b for a, b in zip(self.head_levels, other.head_levels)]
        return merged

    def summary(self) -> Dict[str, object]:
        costs = self.normalized_costs()
        return {
            "steps": self.steps,
            "mean_normalized_cost": sum(costs) / len(costs) if costs else None,
            "speedup": self.speedup() if costs else None,
            "per_level_histogram": {"backbone": list(self.backbone_levels), "head": list(self.head_levels)},
        }


def speedup(ledger: FlopsLedger) -> float:
    return ledger.speedup()


def record_step(ledger: FlopsLedger, components: Iterable[str],
                action: Optional[ComputeAction] = None) -> FlopsLedger:
    ledger.record_step(components, action)
    return ledger
