"""
Dense matrix primitives and seeded randomness.

Matrices are 2-D float64 numpy arrays. Randomness comes from numpy's
counter-based Philox generator so that streams can be split for parallel
rollouts and their exact state serialized.
"""

from typing import Any, Dict, List, Sequence, Union

import numpy as np

from models.errors import RejectedInputError


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """Validate and convert to a finite 2-D float64 array."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2:
        raise RejectedInputError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise RejectedInputError(f"{name} contains non-finite entries")
    return arr


def matmul(a, b) -> np.ndarray:
    """Standard matrix product with shape and finiteness checks."""
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise RejectedInputError(f"Dimension mismatch: {a.shape} x {b.shape}")
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise RejectedInputError("Product overflowed to non-finite values")
    return out


class Rng:
    """
    Splittable seeded generator.

    Identical seeds give identical streams. split() derives independent
    children through SeedSequence spawning, so parallel workers never share
    a stream.
    """

    def __init__(self, seed: Union[int, np.random.SeedSequence]):
        self._seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        self._gen = np.random.Generator(np.random.Philox(self._seed_seq))

    @classmethod
    def for_stream(cls, seed: int, *keys: Union[int, str]) -> "Rng":
        """Stream keyed by (seed, keys); string keys are hashed to stable integers."""
        spawn_key = tuple(_stable_key(k) for k in keys)
        return cls(np.random.SeedSequence(entropy=seed, spawn_key=spawn_key))

    def split(self, n: int) -> List["Rng"]:
        return [Rng(child) for child in self._seed_seq.spawn(n)]

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def gaussian(self, n: int) -> np.ndarray:
        return self._gen.standard_normal(n)

    def uniform(self, low, high, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, options: Sequence[int]) -> int:
        return int(options[int(self._gen.integers(0, len(options)))])

    def state_dict(self) -> Dict[str, Any]:
        """JSON-serializable generator state."""
        return _to_jsonable(self._gen.bit_generator.state)

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> "Rng":
        rng = cls(0)
        rng._gen.bit_generator.state = _from_jsonable(state)
        return rng


def draw_gaussian(rng: Rng, n: int) -> np.ndarray:
    """n standard-normal draws."""
    if n < 1:
        raise RejectedInputError(f"Need at least one draw, got n={n}")
    return rng.gaussian(n)


def _stable_key(key: Union[int, str]) -> int:
    if isinstance(key, int):
        return key
    # FNV-1a, stable across interpreter runs unlike hash()
    h = 0xcbf29ce484222325
    for byte in key.encode():
        h = ((h ^ byte) * 0x100000001b3) & 0xFFFFFFFFFFFFFFFF
    return h


def _to_jsonable(value):
    if isinstance(value, dict):
        return {k: _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return {"__ndarray__": value.tolist(), "dtype": str(value.dtype)}
    if isinstance(value, np.integer):
        return int(value)
    return value


def _from_jsonable(value):
    if isinstance(value, dict):
        if "__ndarray__" in value:
            return np.asarray(value["__ndarray__"], dtype=value["dtype"])
        return {k: _from_jsonable(v) for k, v in value.items()}
    return value
