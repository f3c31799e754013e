"""
Scheduler policy: a masked 15-way categorical over joint actions and a
separate value network, both small tanh MLPs over the normalized
scheduler observation.
"""

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from models import JOINT_ACTIONS, ObservationFeatures, PpoConfig, SchedulerObservation
from models.errors import RejectedInputError, RejectedStateError
from numerics import Activation, DenseNet, Rng
from signals import POLICY_INPUT_SIZE, policy_input
from .constraints import ActionMask


@dataclass
class SchedulerPolicy:
    policy_net: DenseNet
    value_net: DenseNet
    features: ObservationFeatures = ObservationFeatures.ALL

    @classmethod
    def initialize(cls, ppo: PpoConfig, rng: Rng) -> "SchedulerPolicy":
        pi_rng, v_rng = rng.split(2)
        hidden = list(ppo.hidden)
        acts = [Activation.TANH] * len(hidden) + [Activation.IDENTITY]
        policy_net = DenseNet.initialize("policy", [POLICY_INPUT_SIZE, *hidden, JOINT_ACTIONS], acts, pi_rng)
        # Small output layer so the initial distribution is close to uniform over valid actions.
        policy_net.weights[-1] *= 0.01
        value_net = DenseNet.initialize("value", [POLICY_INPUT_SIZE, *hidden, 1], acts, v_rng)
        return cls(policy_net, value_net, ppo.observation_features)

    def copy(self) -> "SchedulerPolicy":
        return SchedulerPolicy(self.policy_net.copy(), self.value_net.copy(), self.features)

    def inputs(self, obs: SchedulerObservation) -> np.ndarray:
        return policy_input(obs, self.features)


class MaskedCategorical:
    """Categorical over joint actions; masked entries have probability exactly zero."""

    def __init__(self, logits: np.ndarray, mask: Union[ActionMask, np.ndarray]):
        valid = mask.valid if isinstance(mask, ActionMask) else np.asarray(mask, dtype=bool)
        logits = np.asarray(logits, dtype=np.float64)
        if logits.shape != (JOINT_ACTIONS,) or valid.shape != (JOINT_ACTIONS,):
            raise RejectedInputError(f"Logits and mask must both have {JOINT_ACTIONS} entries")
        if not valid.any():
            raise RejectedStateError("Every action is masked")
        if not np.all(np.isfinite(logits)):
            raise RejectedInputError("Policy logits must be finite")
        self.valid = valid
        z = np.where(valid, logits, -np.inf)
        shifted = z - z[valid].max()
        self.log_probs = shifted - np.log(np.sum(np.exp(shifted)))
        self.probs = np.exp(self.log_probs)

    def sample(self, rng: Rng) -> int:
        # Inverse CDF restricted to valid entries; a masked index can never be returned.
        idx = np.flatnonzero(self.valid)
        cdf = np.cumsum(self.probs[idx])
        u = rng.uniform(0.0, cdf[-1])
        return int(idx[min(int(np.searchsorted(cdf, u, side='right')), len(idx) - 1)])

    def mode(self) -> int:
        return int(np.argmax(np.where(self.valid, self.log_probs, -np.inf)))

    def log_prob(self, index: int) -> float:
        if not self.valid[index]:
            raise RejectedStateError(f"Action {index} is masked")
        return float(self.log_probs[index])

    def entropy(self) -> float:
        p = self.probs[self.valid]
        return float(-np.sum(p * self.log_probs[self.valid]))


def policy_forward(policy: SchedulerPolicy, obs: SchedulerObservation,
                   mask: Union[ActionMask, np.ndarray]) -> Tuple[MaskedCategorical, float]:
    x = policy.inputs(obs)
    if not np.all(np.isfinite(x)):
        raise RejectedInputError("Scheduler observation must be finite")
    dist = MaskedCategorical(policy.policy_net.apply(x), mask)
    value = float(policy.value_net.apply(x)[0])
    return dist, value


def uniform_distribution(mask: ActionMask) -> MaskedCategorical:
    return MaskedCategorical(np.zeros(JOINT_ACTIONS), mask)
