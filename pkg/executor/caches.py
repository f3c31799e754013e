"""
Execution caches carried across control steps of one episode.

Caches are replaced, never mutated: every executor operation returns new
cache values, so a caller can hold on to the previous ones for comparison.
"""

import hashlib
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from models.errors import RejectedStateError


def _digest(arr: Optional[np.ndarray]) -> str:
    if arr is None:
        return "-"
    return hashlib.sha256(np.ascontiguousarray(arr, dtype=np.float64).tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class BackboneCache:
    anchor: Optional[np.ndarray] = None                    # H_tau, first-layer output of the last full pass
    z_bar: Optional[np.ndarray] = None                     # last computed pooled output
    intermediates: Optional[List[np.ndarray]] = None       # outputs of layers 1 .. L-1 from the last full pass
    first_layer: Optional[np.ndarray] = None               # h1 of the last full pass
    skip_remaining: int = 0
    skip_level: int = 0                                    # backbone level that opened the current window
    rho: float = 1.0                                       # most recently computed probe value

    def __post_init__(self):
        if self.skip_remaining < 0:
            raise RejectedStateError("skip_remaining cannot be negative")
        if self.skip_remaining > 0 and self.z_bar is None:
            raise RejectedStateError("An active skip window needs a cached output")
        if self.intermediates is not None and self.anchor is None:
            raise RejectedStateError("Cached intermediates require an anchor")

    @property
    def empty(self) -> bool:
        return self.z_bar is None

    @property
    def in_skip_window(self) -> bool:
        return self.skip_remaining > 0

    def consume_skip(self) -> "BackboneCache":
        if self.skip_remaining == 0:
            raise RejectedStateError("No active skip window to continue")
        return replace(self, skip_remaining=self.skip_remaining - 1)

    def fingerprint(self) -> Dict[str, str]:
        return {
            "anchor": _digest(self.anchor),
            "z_bar": _digest(self.z_bar),
            "intermediates": "-" if self.intermediates is None else _digest(np.stack(self.intermediates)),
            "first_layer": _digest(self.first_layer),
        }


@dataclass(frozen=True)
class HeadCache:
    deltas: Optional[List[np.ndarray]] = None              # cached refinement updates, one per step

    @property
    def empty(self) -> bool:
        return self.deltas is None

    def with_deltas(self, updates: Dict[int, np.ndarray], steps: int) -> "HeadCache":
        if self.deltas is None:
            if set(updates) != set(range(steps)):
                raise RejectedStateError("An empty head cache can only be filled by a full refinement pass")
            return HeadCache(deltas=[updates[m] for m in range(steps)])
        return HeadCache(deltas=[updates.get(m, d) for m, d in enumerate(self.deltas)])

    def fingerprint(self) -> List[str]:
        return [] if self.deltas is None else [_digest(d) for d in self.deltas]


@dataclass(frozen=True)
class ExecutorCaches:
    backbone: BackboneCache = field(default_factory=BackboneCache)
    head: HeadCache = field(default_factory=HeadCache)
