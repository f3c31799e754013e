"""
Frozen surrogate VLA pipeline.

    tokens = encode(obs)                    vision encoder E
    H_0 = tokens; H_l = H_{l-1} + B_l(...)  backbone L, one residual block per layer
    z = mean_tokens(H_L)
    x^{m+1} = x^m + F^m(x^m, z, s)          iterative action head H
    action = readout(x^M)

Every function here is pure in (weights, inputs); the executor composes
them under a schedule and the unscheduled policy composes them in full.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from models import ACTION_SIZE, OBSERVATION_SIZE, ROBOT_STATE_SIZE, EnvState, ObservationFrame, PipelineConfig, RobotAction
from models.errors import RejectedInputError
from numerics import Activation, DenseNet, GradTape, Rng, Var
from envsim.world import robot_state_vector


@dataclass
class SurrogateWeights:
    """All parameters phi of the base model."""
    config: PipelineConfig
    encoder: DenseNet              # OBSERVATION_SIZE -> d, identity (tanh applied after the position add)
    positions: np.ndarray          # T x d learned position table
    instruction: np.ndarray        # q, length d
    backbone: List[DenseNet]       # L blocks, 3d -> d, tanh
    head: DenseNet                 # A + d + S + M -> head_hidden -> A
    readout: DenseNet              # A -> 4K
    frozen: bool = False

    def parameters(self) -> Dict[str, np.ndarray]:
        params = {"embeddings/positions": self.positions, "embeddings/instruction": self.instruction}
        for net in [self.encoder, *self.backbone, self.head, self.readout]:
            params.update(net.parameters())
        return params

    def nets(self) -> List[DenseNet]:
        return [self.encoder, *self.backbone, self.head, self.readout]

    def freeze(self) -> "SurrogateWeights":
        for net in self.nets():
            net.freeze()
        self.positions.setflags(write=False)
        self.instruction.setflags(write=False)
        self.frozen = True
        return self


def head_input_size(config: PipelineConfig) -> int:
    return config.action_state + config.hidden + ROBOT_STATE_SIZE + config.refinement_steps


def init_weights(config: PipelineConfig, rng: Rng, scale: float = 0.5) -> SurrogateWeights:
    d = config.hidden
    enc_rng, pos_rng, q_rng, bb_rng, head_rng, out_rng = rng.split(6)
    backbone_rngs = bb_rng.split(config.depth)
    return SurrogateWeights(
        config=config,
        encoder=DenseNet.initialize("encoder", [OBSERVATION_SIZE, d], [Activation.IDENTITY], enc_rng, scale=1.0),
        positions=pos_rng.gaussian(config.tokens * d).reshape(config.tokens, d),
        instruction=q_rng.gaussian(d),
        backbone=[DenseNet.initialize(f"backbone.{i + 1}", [3 * d, d], [Activation.TANH], r, scale=scale)
                  for i, r in enumerate(backbone_rngs)],
        head=DenseNet.initialize("head", [head_input_size(config), config.head_hidden, config.action_state],
                                 [Activation.TANH, Activation.IDENTITY], head_rng, scale=scale),
        readout=DenseNet.initialize("readout", [config.action_state, ACTION_SIZE * config.chunk],
                                    [Activation.IDENTITY], out_rng, scale=1.0),
    )


def zero_weights(config: PipelineConfig) -> SurrogateWeights:
    """All-zero parameters (useful for structural checks)."""
    d = config.hidden
    return SurrogateWeights(
        config=config,
        encoder=DenseNet.zeros("encoder", [OBSERVATION_SIZE, d], [Activation.IDENTITY]),
        positions=np.zeros((config.tokens, d)),
        instruction=np.zeros(d),
        backbone=[DenseNet.zeros(f"backbone.{i + 1}", [3 * d, d], [Activation.TANH]) for i in range(config.depth)],
        head=DenseNet.zeros("head", [head_input_size(config), config.head_hidden, config.action_state],
                            [Activation.TANH, Activation.IDENTITY]),
        readout=DenseNet.zeros("readout", [config.action_state, ACTION_SIZE * config.chunk], [Activation.IDENTITY]),
    )


# --- Traces -------------------------------------------------------------

@dataclass
class BackboneTrace:
    hidden: List[np.ndarray]   # L + 1 matrices T x d; index 0 is the encoder output
    z: np.ndarray

    @property
    def first_layer(self) -> np.ndarray:
        return self.hidden[1]


@dataclass
class HeadTrace:
    states: List[np.ndarray]   # x^0 .. x^M
    deltas: List[np.ndarray]   # Delta^0 .. Delta^{M-1}

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


# --- Components ---------------------------------------------------------

def encode(config: PipelineConfig, weights: SurrogateWeights, obs: ObservationFrame) -> np.ndarray:
    x = obs.as_array() if isinstance(obs, ObservationFrame) else np.asarray(obs, dtype=np.float64)
    if x.shape != (OBSERVATION_SIZE,):
        raise RejectedInputError(f"Observation must have shape ({OBSERVATION_SIZE},), got {x.shape}")
    return np.tanh(weights.encoder.apply(x) + weights.positions)


def backbone_layer(config: PipelineConfig, weights: SurrogateWeights, layer: int, h: np.ndarray) -> np.ndarray:
    """Layer `layer` (1-based): token-wise residual block on [token | q | mean token]."""
    n = h.shape[0]
    q = np.broadcast_to(weights.instruction, (n, config.hidden))
    mixed = np.broadcast_to(h.mean(axis=0, keepdims=True), (n, config.hidden))
    return h + weights.backbone[layer - 1].apply(np.concatenate([h, q, mixed], axis=-1))


def pool(h: np.ndarray) -> np.ndarray:
    return h.mean(axis=0)


def backbone_full(config: PipelineConfig, weights: SurrogateWeights, tokens: np.ndarray) -> BackboneTrace:
    tokens = np.asarray(tokens, dtype=np.float64)
    if tokens.shape != (config.tokens, config.hidden):
        raise RejectedInputError(f"Tokens must be {config.tokens}x{config.hidden}, got {tokens.shape}")
    hidden = [tokens]
    for layer in range(1, config.depth + 1):
        hidden.append(backbone_layer(config, weights, layer, hidden[-1]))
    return BackboneTrace(hidden=hidden, z=pool(hidden[-1]))


def step_embedding(config: PipelineConfig, m: int) -> np.ndarray:
    e = np.zeros(config.refinement_steps)
    e[m] = 1.0
    return e


def head_step(config: PipelineConfig, weights: SurrogateWeights, m: int,
              x: np.ndarray, z: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Delta^m produced by refinement block F^m."""
    return weights.head.apply(np.concatenate([x, z, s, step_embedding(config, m)]))


def initial_action_state(config: PipelineConfig) -> np.ndarray:
    return np.zeros(config.action_state)


def head_full(config: PipelineConfig, weights: SurrogateWeights, z: np.ndarray, s: np.ndarray,
              x0: Optional[np.ndarray] = None) -> HeadTrace:
    x = initial_action_state(config) if x0 is None else np.asarray(x0, dtype=np.float64)
    states, deltas = [x], []
    for m in range(config.refinement_steps):
        delta = head_step(config, weights, m, x, z, s)
        x = x + delta
        deltas.append(delta)
        states.append(x)
    return HeadTrace(states=states, deltas=deltas)


def decode(config: PipelineConfig, weights: SurrogateWeights, x_final: np.ndarray) -> List[RobotAction]:
    """Linear readout to K normalized actions, scaled to the clip bounds."""
    flat = weights.readout.apply(x_final)
    return [RobotAction.from_normalized(chunk) for chunk in flat.reshape(config.chunk, ACTION_SIZE)]


class UnscheduledPolicy:
    """The baseline pipeline: every component runs in full at every step."""

    def __init__(self, weights: SurrogateWeights):
        self.weights = weights
        self.config = weights.config

    def trace(self, obs: ObservationFrame, state: EnvState):
        tokens = encode(self.config, self.weights, obs)
        bb = backbone_full(self.config, self.weights, tokens)
        head = head_full(self.config, self.weights, bb.z, robot_state_vector(state))
        return bb, head

    def act(self, obs: ObservationFrame, state: EnvState) -> List[RobotAction]:
        _, head = self.trace(obs, state)
        return decode(self.config, self.weights, head.final)


# --- Batched forward on a gradient tape --------------------------------

def forward_on_tape(tape: GradTape, weights: SurrogateWeights, observations: np.ndarray,
                    robot_states: np.ndarray) -> Var:
    """
    Full pipeline over a batch of B samples, recorded on `tape`.
    Returns normalized actions of shape (B, 1, 4K). Same arithmetic as the
    per-sample functions above, with a leading batch axis.
    """
    config = weights.config
    obs = np.asarray(observations, dtype=np.float64)
    states = np.asarray(robot_states, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[1] != OBSERVATION_SIZE:
        raise RejectedInputError(f"Observation batch must be (B, {OBSERVATION_SIZE}), got {obs.shape}")
    if states.shape != (obs.shape[0], ROBOT_STATE_SIZE):
        raise RejectedInputError(f"Robot state batch must be ({obs.shape[0]}, {ROBOT_STATE_SIZE}), got {states.shape}")
    batch, d, n_tokens = obs.shape[0], config.hidden, config.tokens

    projected = weights.encoder.apply_on_tape(tape, tape.const(obs[:, None, :]))            # (B, 1, d)
    positions = tape.param("embeddings/positions", weights.positions)
    h = tape.activate(tape.add(projected, positions), Activation.TANH)                      # (B, T, d)

    q = tape.param("embeddings/instruction", weights.instruction)
    for net in weights.backbone:
        shape = (batch, n_tokens, d)
        mixed = tape.broadcast(tape.mean(h, axis=-2), shape)
        block = net.apply_on_tape(tape, tape.concat([h, tape.broadcast(q, shape), mixed]))
        h = tape.add(h, block)

    z = tape.mean(h, axis=-2)                                                               # (B, 1, d)
    s = tape.const(states[:, None, :])
    x = tape.const(np.zeros((batch, 1, config.action_state)))
    for m in range(config.refinement_steps):
        onehot = tape.const(np.broadcast_to(step_embedding(config, m), (batch, 1, config.refinement_steps)))
        delta = weights.head.apply_on_tape(tape, tape.concat([x, z, s, onehot]))
        x = tape.add(x, delta)
    return weights.readout.apply_on_tape(tape, x)


def predict_normalized(weights: SurrogateWeights, observations: np.ndarray, robot_states: np.ndarray) -> np.ndarray:
    """Batched normalized actions (B, 4K) without keeping the tape."""
    return forward_on_tape(GradTape(), weights, observations, robot_states).value[:, 0, :]
