"""
Maskable PPO pieces: generalized advantage estimation, the clipped
surrogate with entropy bonus, the value regression, and one update over a
gathered batch.

Loss gradients are formed analytically with respect to the masked
log-probabilities and pushed through the network by the gradient tape.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from models import JOINT_ACTIONS, PpoConfig
from models.errors import RejectedInputError
from numerics import Adam, GradTape, Rng, backward
from .policy import SchedulerPolicy

logger = logging.getLogger(__name__)


def compute_gae(rewards: Sequence[float], values: Sequence[float], dones: Sequence[bool],
                gamma: float, lam: float, last_value: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Advantages and returns over a sequence of concatenated episodes.
    `dones[t]` marks t as the last step of its episode; bootstrapping stops there.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    d = np.asarray(dones, dtype=bool)
    if not (r.shape == v.shape == d.shape) or r.ndim != 1:
        raise RejectedInputError(f"rewards, values and dones must be aligned 1-D sequences: {r.shape}, {v.shape}, {d.shape}")

    advantages = np.zeros_like(r)
    gae = 0.0
    for t in reversed(range(len(r))):
        nonterminal = 0.0 if d[t] else 1.0
        next_value = v[t + 1] if t + 1 < len(r) else last_value
        delta = r[t] + gamma * next_value * nonterminal - v[t]
        gae = delta + gamma * lam * nonterminal * gae
        advantages[t] = gae
    return advantages, advantages + v


@dataclass
class RolloutBatch:
    inputs: np.ndarray        # (N, 5) normalized observations
    masks: np.ndarray         # (N, 15) bool
    actions: np.ndarray       # (N,) joint indices
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)

    def subset(self, idx) -> "RolloutBatch":
        return RolloutBatch(self.inputs[idx], self.masks[idx], self.actions[idx],
                            self.old_log_probs[idx], self.advantages[idx], self.returns[idx])


def _masked_log_probs(policy: SchedulerPolicy, batch: RolloutBatch, tape: GradTape):
    logits = policy.policy_net.apply_on_tape(tape, tape.const(batch.inputs))
    return tape.log_softmax(logits, batch.masks)


def _surrogate_terms(log_probs: np.ndarray, batch: RolloutBatch, cfg: PpoConfig):
    n = len(batch)
    taken = log_probs[np.arange(n), batch.actions]
    ratio = np.exp(taken - batch.old_log_probs)
    adv = batch.advantages
    clipped = np.clip(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon)
    surrogate = np.minimum(ratio * adv, clipped * adv)
    probs = np.exp(log_probs)
    plogp = np.where(batch.masks, probs * np.where(batch.masks, log_probs, 0.0), 0.0)
    entropy = -plogp.sum(axis=1)
    return taken, ratio, surrogate, entropy, probs


def policy_loss(policy: SchedulerPolicy, batch: RolloutBatch, cfg: PpoConfig) -> float:
    """-mean(clipped surrogate) - entropy_coef * mean(entropy)."""
    log_probs = _masked_log_probs(policy, batch, GradTape()).value
    _, _, surrogate, entropy, _ = _surrogate_terms(log_probs, batch, cfg)
    return float(-surrogate.mean() - cfg.entropy_coef * entropy.mean())


def policy_loss_and_grads(policy: SchedulerPolicy, batch: RolloutBatch,
                          cfg: PpoConfig) -> Tuple[float, Dict[str, np.ndarray], Dict[str, float]]:
    n = len(batch)
    tape = GradTape()
    out = _masked_log_probs(policy, batch, tape)
    log_probs = out.value
    _, ratio, surrogate, entropy, probs = _surrogate_terms(log_probs, batch, cfg)
    adv = batch.advantages

    # d(-surrogate)/d(log p_taken): -A * r wherever the unclipped branch is the active minimum
    active = ((adv >= 0) & (ratio < 1.0 + cfg.clip_epsilon)) | ((adv < 0) & (ratio > 1.0 - cfg.clip_epsilon))
    grad = np.zeros((n, JOINT_ACTIONS))
    grad[np.arange(n), batch.actions] = np.where(active, -adv * ratio, 0.0) / n

    # d(-c * H)/d(log p_k) = c * p_k * (1 + log p_k), zero on masked entries
    safe_lp = np.where(batch.masks, log_probs, 0.0)
    grad += np.where(batch.masks, cfg.entropy_coef * probs * (1.0 + safe_lp), 0.0) / n

    grads = backward(tape, grad, output=out)
    loss = float(-surrogate.mean() - cfg.entropy_coef * entropy.mean())
    clip_fraction = float(np.mean(np.abs(ratio - 1.0) > cfg.clip_epsilon))
    return loss, grads, {"entropy": float(entropy.mean()), "clip_fraction": clip_fraction}


def value_loss(policy: SchedulerPolicy, batch: RolloutBatch, cfg: PpoConfig) -> float:
    v = policy.value_net.apply(batch.inputs)[:, 0]
    return float(cfg.value_coef * np.mean((v - batch.returns) ** 2))


def value_loss_and_grads(policy: SchedulerPolicy, batch: RolloutBatch,
                         cfg: PpoConfig) -> Tuple[float, Dict[str, np.ndarray]]:
    tape = GradTape()
    out = policy.value_net.apply_on_tape(tape, tape.const(batch.inputs))
    err = out.value[:, 0] - batch.returns
    grad = (cfg.value_coef * 2.0 * err / len(batch))[:, None]
    return float(cfg.value_coef * np.mean(err ** 2)), backward(tape, grad, output=out)


class PpoOptimizer:
    """Adam state for the policy and value nets of one SchedulerPolicy."""

    def __init__(self, policy: SchedulerPolicy, cfg: PpoConfig):
        self.cfg = cfg
        self.policy_adam = Adam(policy.policy_net.parameters(), lr=cfg.learning_rate)
        self.value_adam = Adam(policy.value_net.parameters(), lr=cfg.learning_rate)

    def update(self, policy: SchedulerPolicy, batch: RolloutBatch, rng: Rng) -> Dict[str, float]:
        cfg = self.cfg
        adv = batch.advantages
        std = adv.std()
        normalized = RolloutBatch(batch.inputs, batch.masks, batch.actions, batch.old_log_probs,
                                  (adv - adv.mean()) / (std + 1e-8) if len(adv) > 1 else adv, batch.returns)

        stats = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "clip_fraction": 0.0, "grad_norm": 0.0}
        count = 0
        for _ in range(cfg.epochs):
            order = rng.permutation(len(batch))
            for start in range(0, len(batch), cfg.minibatch_size):
                mb = normalized.subset(order[start:start + cfg.minibatch_size])
                p_loss, p_grads, info = policy_loss_and_grads(policy, mb, cfg)
                v_loss, v_grads = value_loss_and_grads(policy, mb, cfg)
                stats["grad_norm"] += self.policy_adam.step(p_grads, max_grad_norm=cfg.max_grad_norm)
                self.value_adam.step(v_grads, max_grad_norm=cfg.max_grad_norm)
                stats["policy_loss"] += p_loss
                stats["value_loss"] += v_loss
                stats["entropy"] += info["entropy"]
                stats["clip_fraction"] += info["clip_fraction"]
                count += 1
        return {k: v / max(count, 1) for k, v in stats.items()}
