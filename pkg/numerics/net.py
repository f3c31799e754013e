"""
Small fully-connected networks with reverse-mode gradients.

A GradTape records primitive operations during a forward pass and replays
them in exact reverse order during backward(). Only the primitives the
surrogate pipeline and the PPO trainer need are supported: affine maps,
elementwise activations, concatenation, token means/broadcasts, and a
masked log-softmax.
"""

import base64
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from models.errors import RejectedInputError, RejectedStateError
from .matrix import Rng

logger = logging.getLogger(__name__)


class Activation(str, Enum):
    TANH = "tanh"
    RELU = "relu"
    IDENTITY = "identity"


def activate(x: np.ndarray, kind: Activation) -> np.ndarray:
    if kind == Activation.TANH:
        return np.tanh(x)
    if kind == Activation.RELU:
        return np.maximum(x, 0.0)
    return x


# --- Tape ---------------------------------------------------------------

@dataclass(eq=False)
class Var:
    """A value on the tape. Leaves registered via GradTape.param carry a key."""
    value: np.ndarray
    key: Optional[str] = None
    grad: Optional[np.ndarray] = None


@dataclass
class _Op:
    name: str
    inputs: Tuple[Var, ...]
    output: Var
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class GradTape:
    """
    Records primitives in order. One tape serves one forward pass; it is
    confined to a single worker.
    """

    def __init__(self):
        self.ops: List[_Op] = []
        self.params: Dict[str, Var] = {}
        self.output: Optional[Var] = None

    # Leaves

    def param(self, key: str, value: np.ndarray) -> Var:
        """Register (or fetch) a parameter leaf under `key`."""
        var = self.params.get(key)
        if var is None:
            var = Var(value=value, key=key)
            self.params[key] = var
        return var

    @staticmethod
    def const(value) -> Var:
        return Var(value=np.asarray(value, dtype=np.float64))

    def _record(self, name, inputs, value, backward) -> Var:
        out = Var(value=value)
        self.ops.append(_Op(name, tuple(inputs), out, backward))
        self.output = out
        return out

    # Primitives

    def matmul(self, x: Var, w: Var) -> Var:
        xv, wv = x.value, w.value

        def back(g):
            gx = g @ wv.T
            gw = xv.reshape(-1, xv.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            return gx, gw

        return self._record("matmul", (x, w), xv @ wv, back)

    def add(self, a: Var, b: Var) -> Var:
        sa, sb = a.value.shape, b.value.shape
        return self._record("add", (a, b), a.value + b.value,
                            lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))

    def activate(self, x: Var, kind: Activation) -> Var:
        kind = Activation(kind)
        y = activate(x.value, kind)
        if kind == Activation.TANH:
            back = lambda g: (g * (1.0 - y * y),)
        elif kind == Activation.RELU:
            mask = (x.value > 0.0).astype(np.float64)
            back = lambda g: (g * mask,)
        else:
            back = lambda g: (g,)
        return self._record(kind.value, (x,), y, back)

    def concat(self, parts: Sequence[Var]) -> Var:
        """Concatenate along the last axis."""
        sizes = [p.value.shape[-1] for p in parts]
        splits = np.cumsum(sizes)[:-1]
        value = np.concatenate([p.value for p in parts], axis=-1)
        return self._record("concat", parts, value, lambda g: tuple(np.split(g, splits, axis=-1)))

    def mean(self, x: Var, axis: int) -> Var:
        """Mean over `axis`, keeping the axis."""
        n = x.value.shape[axis]
        shape = x.value.shape
        return self._record("mean", (x,), x.value.mean(axis=axis, keepdims=True),
                            lambda g: (np.broadcast_to(g / n, shape).copy(),))

    def broadcast(self, x: Var, shape: Tuple[int, ...]) -> Var:
        src = x.value.shape
        return self._record("broadcast", (x,), np.broadcast_to(x.value, shape).copy(),
                            lambda g: (_unbroadcast(g, src),))

    def log_softmax(self, logits: Var, mask: Optional[np.ndarray] = None) -> Var:
        """Log-softmax over the last axis; masked entries get -inf and zero gradient."""
        z = logits.value
        if mask is not None:
            z = np.where(mask, z, -np.inf)
        zmax = np.max(z, axis=-1, keepdims=True)
        shifted = z - zmax
        logp = shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
        probs = np.exp(logp)

        def back(g):
            g = np.where(np.isfinite(logp), g, 0.0)
            return (g - probs * g.sum(axis=-1, keepdims=True),)

        return self._record("log_softmax", (logits,), logp, back)


def backward(tape: GradTape, output_grad, output: Optional[Var] = None) -> Dict[str, np.ndarray]:
    """
    Reverse pass over the tape, seeded with `output_grad` at `output`
    (default: the last recorded value). Returns a gradient for every
    registered parameter; parameters that did not influence the output get
    exact zeros.
    """
    if not tape.ops:
        raise RejectedStateError("Cannot run backward over an empty tape")
    target = output if output is not None else tape.output
    seed = np.asarray(output_grad, dtype=np.float64)
    if seed.shape != target.value.shape:
        raise RejectedInputError(f"Output gradient shape {seed.shape} != output shape {target.value.shape}")

    for op in tape.ops:
        op.output.grad = None
    for var in tape.params.values():
        var.grad = None
    target.grad = seed

    for op in reversed(tape.ops):
        g = op.output.grad
        if g is None:
            continue
        for inp, gi in zip(op.inputs, op.backward(g)):
            if gi is None:
                continue
            inp.grad = gi if inp.grad is None else inp.grad + gi

    return {key: (var.grad if var.grad is not None else np.zeros_like(var.value))
            for key, var in tape.params.items()}


# --- Dense networks -----------------------------------------------------

@dataclass
class DenseNet:
    """
    Stack of affine layers with one activation per layer.
    Weights are stored (in, out) so a batch of rows maps as x @ W + b.
    """
    name: str
    sizes: List[int]
    activations: List[Activation]
    weights: List[np.ndarray] = field(default_factory=list)
    biases: List[np.ndarray] = field(default_factory=list)
    frozen: bool = False

    def __post_init__(self):
        if len(self.sizes) < 2:
            raise RejectedInputError("A DenseNet needs at least an input and an output size")
        if len(self.activations) != len(self.sizes) - 1:
            raise RejectedInputError("One activation per layer is required")
        self.activations = [Activation(a) for a in self.activations]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[i], self.sizes[i + 1]) or b.shape != (self.sizes[i + 1],):
                raise RejectedInputError(f"Layer {i} of '{self.name}' has inconsistent shapes")

    @classmethod
    def initialize(cls, name: str, sizes: Sequence[int], activations: Sequence, rng: Rng,
                   scale: float = 1.0) -> "DenseNet":
        """Scaled Gaussian (fan-in) initialization, zero biases."""
        weights = [rng.gaussian(n_in * n_out).reshape(n_in, n_out) * (scale / np.sqrt(n_in))
                   for n_in, n_out in zip(sizes[:-1], sizes[1:])]
        biases = [np.zeros(n_out) for n_out in sizes[1:]]
        return cls(name, list(sizes), list(activations), weights, biases)

    @classmethod
    def zeros(cls, name: str, sizes: Sequence[int], activations: Sequence) -> "DenseNet":
        return cls(name, list(sizes), list(activations),
                   [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(b) for b in sizes[1:]])

    @property
    def input_size(self) -> int:
        return self.sizes[0]

    @property
    def output_size(self) -> int:
        return self.sizes[-1]

    def parameters(self) -> Dict[str, np.ndarray]:
        params = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            params[f"{self.name}/W{i}"] = w
            params[f"{self.name}/b{i}"] = b
        return params

    def freeze(self) -> "DenseNet":
        for arr in self.weights + self.biases:
            arr.setflags(write=False)
        self.frozen = True
        return self

    def copy(self, name: Optional[str] = None) -> "DenseNet":
        return DenseNet(name or self.name, list(self.sizes), list(self.activations),
                        [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Plain forward pass over the last axis."""
        for w, b, act in zip(self.weights, self.biases, self.activations):
            x = activate(x @ w + b, act)
        return x

    def apply_on_tape(self, tape: GradTape, x: Var) -> Var:
        for i, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            h = tape.add(tape.matmul(x, tape.param(f"{self.name}/W{i}", w)),
                         tape.param(f"{self.name}/b{i}", b))
            x = tape.activate(h, act)
        return x


def forward(net: DenseNet, inputs, tape: Optional[GradTape] = None) -> np.ndarray:
    """
    Evaluate `net` on a vector (or a batch of row vectors). When a tape is
    given every primitive is recorded and tape.output holds the result.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.shape[-1] != net.input_size:
        raise RejectedInputError(f"'{net.name}' expects input size {net.input_size}, got {x.shape[-1]}")
    if tape is None:
        return net.apply(x)
    return net.apply_on_tape(tape, tape.const(x)).value


# --- Serialization ------------------------------------------------------

def encode_blob(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype='<f8').tobytes()).decode('ascii')


def decode_blob(blob: str, shape: Tuple[int, ...]) -> np.ndarray:
    return np.frombuffer(base64.b64decode(blob), dtype='<f8').reshape(shape).astype(np.float64)


class DenseNetDocument(BaseModel):
    """JSON form of one DenseNet: little-endian float64 blobs, base64-encoded."""

    format_version: Literal[1] = 1
    name: str
    layer_sizes: List[int] = Field(min_length=2)
    activations: List[Activation]
    weights: List[str]
    biases: List[str]
    frozen: bool = False

    @model_validator(mode='after')
    def validate_layers(self):
        n = len(self.layer_sizes) - 1
        if not (len(self.activations) == len(self.weights) == len(self.biases) == n):
            raise ValueError("Layer count mismatch between sizes, activations and blobs")
        return self

    @classmethod
    def from_net(cls, net: DenseNet) -> "DenseNetDocument":
        return cls(name=net.name, layer_sizes=list(net.sizes), activations=list(net.activations),
                   weights=[encode_blob(w) for w in net.weights],
                   biases=[encode_blob(b) for b in net.biases], frozen=net.frozen)

    def to_net(self) -> DenseNet:
        sizes = self.layer_sizes
        net = DenseNet(self.name, list(sizes), list(self.activations),
                       [decode_blob(w, (a, b)) for w, a, b in zip(self.weights, sizes[:-1], sizes[1:])],
                       [decode_blob(bb, (b,)) for bb, b in zip(self.biases, sizes[1:])])
        return net.freeze() if self.frozen else net
