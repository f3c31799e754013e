"""
Behavior cloning of the surrogate pipeline onto expert demonstrations.

End-to-end mean-squared-error regression of encoder, backbone and head
onto the normalized expert actions, with minibatch Adam and a linear
learning-rate decay. The returned weights are frozen.
"""

import logging
from typing import List, Optional

import numpy as np

from models import CloneConfig, PipelineConfig
from models.errors import RejectedInputError
from numerics import Adam, GradTape, Rng, backward
from generators.demo_factory import DemoDataset
from .pipeline import SurrogateWeights, forward_on_tape, init_weights, predict_normalized

logger = logging.getLogger(__name__)

EVAL_CHUNK = 2048


def dataset_loss(weights: SurrogateWeights, dataset: DemoDataset) -> float:
    """Mean squared error over the whole dataset."""
    total = 0.0
    for start in range(0, len(dataset), EVAL_CHUNK):
        part = slice(start, start + EVAL_CHUNK)
        pred = predict_normalized(weights, dataset.observations[part], dataset.robot_states[part])
        total += float(np.sum((pred - dataset.actions[part]) ** 2))
    return total / dataset.actions.size


class BehaviorCloner:
    """Trains one set of surrogate weights; keeps the per-epoch loss history."""

    def __init__(self, config: PipelineConfig, clone: CloneConfig, seed: int):
        self.config = config
        self.clone = clone
        self.seed = seed
        self.epoch_losses: List[float] = []

    def _learning_rate(self, epoch: int, epochs: int) -> float:
        if epochs == 1:
            return self.clone.learning_rate
        frac = epoch / (epochs - 1)
        return self.clone.learning_rate + frac * (self.clone.final_learning_rate - self.clone.learning_rate)

    def fit(self, dataset: DemoDataset, epochs: Optional[int] = None) -> SurrogateWeights:
        if len(dataset) == 0:
            raise RejectedInputError("Cannot clone from an empty dataset")
        epochs = epochs or self.clone.epochs

        init_rng, shuffle_rng = Rng.for_stream(self.seed, "clone").split(2)
        weights = init_weights(self.config, init_rng, scale=self.clone.init_scale)
        optimizer = Adam(weights.parameters(), lr=self.clone.learning_rate)
        n = len(dataset)
        batch = min(self.clone.batch_size, n)

        logger.info(f"🧠 Cloning on {n} samples for {epochs} epochs (batch={batch}, seed={self.seed})")
        for epoch in range(epochs):
            lr = self._learning_rate(epoch, epochs)
            order = shuffle_rng.permutation(n)
            for start in range(0, n, batch):
                idx = order[start:start + batch]
                tape = GradTape()
                out = forward_on_tape(tape, weights, dataset.observations[idx], dataset.robot_states[idx])
                diff = out.value - dataset.actions[idx][:, None, :]
                grads = backward(tape, 2.0 * diff / diff.size)
                optimizer.step(grads, lr=lr)

            loss = dataset_loss(weights, dataset)
            self.epoch_losses.append(loss)
            if epoch % 10 == 0 or epoch == epochs - 1:
                logger.info(f"   epoch {epoch + 1}/{epochs}: loss={loss:.6f} lr={lr:.2e}")

        return weights.freeze()


def clone_behavior(config: PipelineConfig, dataset: DemoDataset, clone: CloneConfig, seed: int,
                   epochs: Optional[int] = None) -> SurrogateWeights:
    return BehaviorCloner(config, clone, seed).fit(dataset, epochs)
