"""
Expert demonstration factory for behavior cloning.

Runs the scripted expert in the synthetic world and records
(observation, robot state, clean expert action) triples. The executed
action carries small Gaussian motion noise so the dataset also covers
states slightly off the expert's own path; the label is always the clean
expert command for the visited state.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from models import ACTION_BOUNDS, ACTION_SIZE, OBSERVATION_SIZE, ROBOT_STATE_SIZE, RobotAction
from models.errors import RejectedInputError
from numerics import Rng
from envsim import T_MAX, expert_action, reset, robot_state_vector, step

logger = logging.getLogger(__name__)

DEMO_SEED_OFFSET = 100_000


@dataclass
class DemoDataset:
    observations: np.ndarray   # (N, 16)
    robot_states: np.ndarray   # (N, 6)
    actions: np.ndarray        # (N, 4) expert actions in units of the clip bounds
    episode_seeds: List[int]
    successes: int = 0

    def __post_init__(self):
        n = self.observations.shape[0]
        if self.observations.shape != (n, OBSERVATION_SIZE):
            raise RejectedInputError(f"observations must be (N, {OBSERVATION_SIZE})")
        if self.robot_states.shape != (n, ROBOT_STATE_SIZE) or self.actions.shape != (n, ACTION_SIZE):
            raise RejectedInputError("observations, robot_states and actions must have the same length")

    def __len__(self) -> int:
        return self.observations.shape[0]

    @classmethod
    def from_samples(cls, samples: List[Tuple[np.ndarray, np.ndarray, np.ndarray]]) -> "DemoDataset":
        """Build a dataset from explicit (obs, state, normalized action) triples."""
        if not samples:
            return cls(np.zeros((0, OBSERVATION_SIZE)), np.zeros((0, ROBOT_STATE_SIZE)),
                       np.zeros((0, ACTION_SIZE)), [])
        obs, states, actions = zip(*samples)
        return cls(np.stack(obs), np.stack(states), np.stack(actions), [])


class DemoFactory:
    def __init__(self, perturbation_std: float = 0.1, max_steps: int = T_MAX):
        if perturbation_std < 0:
            raise RejectedInputError("perturbation_std must be non-negative")
        self.perturbation_std = perturbation_std
        self.max_steps = max_steps

    def _perturb(self, action: RobotAction, rng: Rng) -> RobotAction:
        if self.perturbation_std == 0.0:
            return action
        noise = rng.gaussian(3) * self.perturbation_std * np.asarray(ACTION_BOUNDS[:3])
        return RobotAction(
            velocity=(action.velocity[0] + noise[0], action.velocity[1] + noise[1]),
            orientation_rate=action.orientation_rate + noise[2],
            aperture_rate=action.aperture_rate,
        ).clipped()

    def collect_episode(self, episode_seed: int):
        """One perturbed expert episode. Returns (observations, states, labels, success)."""
        state, obs = reset(episode_seed, self.max_steps)
        noise_rng = Rng.for_stream(episode_seed, "demo-noise")
        observations, states, labels = [], [], []
        while not state.done:
            label = expert_action(state)
            observations.append(obs.as_array())
            states.append(robot_state_vector(state))
            labels.append(label.normalized())
            state, obs, _, _ = step(state, self._perturb(label, noise_rng))
        return observations, states, labels, state.success

    def collect(self, episodes: int, seed: int) -> DemoDataset:
        if episodes < 1:
            raise RejectedInputError(f"Need at least one demonstration episode, got {episodes}")
        logger.info(f"🎬 Collecting {episodes} expert episodes (seed={seed}, noise={self.perturbation_std})")

        observations, states, labels, seeds = [], [], [], []
        successes = 0
        for i in range(episodes):
            episode_seed = DEMO_SEED_OFFSET + seed * episodes + i
            o, s, a, success = self.collect_episode(episode_seed)
            observations.extend(o)
            states.extend(s)
            labels.extend(a)
            seeds.append(episode_seed)
            if success:
                successes += 1
            else:
                logger.warning(f"Demo episode {episode_seed} ended without placing the object")

        logger.info(f"✅ {len(observations)} samples, {successes}/{episodes} successful demos")
        return DemoDataset(np.stack(observations), np.stack(states), np.stack(labels), seeds, successes)


def collect_demonstrations(episodes: int, seed: int, perturbation_std: float = 0.1) -> DemoDataset:
    return DemoFactory(perturbation_std).collect(episodes, seed)
