import json

import numpy as np
import pytest

from models import ACTION_BOUNDS, CloneConfig
from models.errors import MissingCheckpointError, RejectedInputError
from numerics import Activation, DenseNet, GradTape, Rng, backward
from envsim import reset, robot_state_vector
from generators.demo_factory import DemoDataset, collect_demonstrations
from surrogate import (
    BehaviorCloner,
    UnscheduledPolicy,
    backbone_full,
    clone_behavior,
    dataset_loss,
    decode,
    encode,
    forward_on_tape,
    head_full,
    init_weights,
    load_bundle,
    predict_normalized,
    save_bundle,
    zero_weights,
)


def random_batch(n, seed):
    obs, states = [], []
    for i in range(n):
        state, frame = reset(seed + i)
        obs.append(frame.as_array())
        states.append(robot_state_vector(state))
    return np.stack(obs), np.stack(states)


def test_zero_projection_tokens_are_activated_positions(small_config):
    weights = init_weights(small_config, Rng(0))
    weights.encoder = DenseNet.zeros("encoder", [16, small_config.hidden], [Activation.IDENTITY])
    _, frame = reset(0)
    np.testing.assert_array_equal(encode(small_config, weights, frame), np.tanh(weights.positions))


def test_zero_weights_give_zero_action(small_config):
    weights = zero_weights(small_config)
    state, frame = reset(1)
    actions = UnscheduledPolicy(weights).act(frame, state)
    assert len(actions) == small_config.chunk
    np.testing.assert_array_equal(actions[0].as_array(), np.zeros(4))


def test_backbone_trace_shapes(small_config, small_weights):
    _, frame = reset(2)
    trace = backbone_full(small_config, small_weights, encode(small_config, small_weights, frame))
    assert len(trace.hidden) == small_config.depth + 1
    assert all(h.shape == (small_config.tokens, small_config.hidden) for h in trace.hidden)
    np.testing.assert_array_equal(trace.z, trace.hidden[-1].mean(axis=0))
    with pytest.raises(RejectedInputError):
        backbone_full(small_config, small_weights, np.zeros((small_config.tokens + 1, small_config.hidden)))


def test_head_states_accumulate_deltas(small_config, small_weights):
    z = Rng(3).gaussian(small_config.hidden)
    s = Rng(4).gaussian(6)
    trace = head_full(small_config, small_weights, z, s)
    assert len(trace.deltas) == small_config.refinement_steps
    np.testing.assert_allclose(trace.final, np.sum(trace.deltas, axis=0), atol=1e-12)


def test_decoded_actions_respect_bounds(small_config, small_weights):
    actions = decode(small_config, small_weights, np.full(small_config.action_state, 100.0))
    a = actions[0].as_array()
    assert np.all(np.abs(a) <= np.asarray(ACTION_BOUNDS) + 1e-15)


def test_encode_rejects_wrong_size(small_config, small_weights):
    with pytest.raises(RejectedInputError):
        encode(small_config, small_weights, np.zeros(15))


def test_batched_tape_path_matches_per_sample_path(small_config, small_weights):
    obs, states = random_batch(5, 10)
    batched = predict_normalized(small_weights, obs, states)
    for i in range(5):
        trace = backbone_full(small_config, small_weights, encode(small_config, small_weights, obs[i]))
        head = head_full(small_config, small_weights, trace.z, states[i])
        np.testing.assert_allclose(batched[i], small_weights.readout.apply(head.final), rtol=0, atol=1e-12)


def test_unscheduled_policy_is_deterministic(default_weights):
    state, frame = reset(0)
    policy = UnscheduledPolicy(default_weights)
    assert policy.act(frame, state) == policy.act(frame, state)


@pytest.mark.parametrize("trial", range(3))
def test_pipeline_gradients_match_finite_differences(small_config, trial):
    weights = init_weights(small_config, Rng.for_stream(trial, "surrogate-gradcheck"))
    obs, states = random_batch(3, 100 * trial)
    g = Rng(trial).gaussian(3 * 4).reshape(3, 1, 4)

    tape = GradTape()
    out = forward_on_tape(tape, weights, obs, states)
    grads = backward(tape, g, output=out)

    def loss():
        return float(np.sum(forward_on_tape(GradTape(), weights, obs, states).value * g))

    eps = 1e-6
    rng = Rng(trial + 50)
    for key, arr in weights.parameters().items():
        # A handful of entries per tensor keeps this quick.
        flat = arr.reshape(-1)
        for i in rng.permutation(flat.size)[:4]:
            old = flat[i]
            flat[i] = old + eps
            up = loss()
            flat[i] = old - eps
            down = loss()
            flat[i] = old
            numeric = (up - down) / (2 * eps)
            analytic = grads[key].reshape(-1)[i]
            assert abs(numeric - analytic) <= 1e-4 * max(abs(numeric) + abs(analytic), 1e-3), key


def test_frozen_weights_are_read_only(small_weights):
    with pytest.raises(ValueError):
        small_weights.positions[0, 0] = 1.0
    with pytest.raises(ValueError):
        small_weights.backbone[0].weights[0][0, 0] = 1.0


# --- Demonstrations and cloning ---

def test_demo_dataset_labels_are_clean_expert_actions():
    dataset = collect_demonstrations(2, seed=0, perturbation_std=0.1)
    assert len(dataset) > 0
    assert dataset.observations.shape == (len(dataset), 16)
    assert np.all(np.abs(dataset.actions) <= 1.0 + 1e-12)
    assert all(s >= 100_000 for s in dataset.episode_seeds)


def test_cloning_reduces_loss_and_freezes(small_config):
    dataset = collect_demonstrations(2, seed=1)
    clone = CloneConfig(episodes=2, epochs=8, batch_size=64)
    cloner = BehaviorCloner(small_config, clone, seed=0)
    weights = cloner.fit(dataset)
    assert weights.frozen
    assert len(cloner.epoch_losses) == 8
    assert cloner.epoch_losses[-1] < cloner.epoch_losses[0]
    assert dataset_loss(weights, dataset) == pytest.approx(cloner.epoch_losses[-1])


def test_cloning_loss_never_rises_over_ten_epochs(small_config):
    dataset = collect_demonstrations(2, seed=4)
    cloner = BehaviorCloner(small_config, CloneConfig(epochs=30, batch_size=1024), seed=1)
    cloner.fit(dataset)
    losses = cloner.epoch_losses
    assert all(losses[e + 10] <= losses[e] for e in range(len(losses) - 10))


def test_single_sample_is_memorized(small_config):
    state, frame = reset(0)
    target = np.array([0.3, -0.2, 0.1, 0.5])
    dataset = DemoDataset.from_samples([(frame.as_array(), robot_state_vector(state), target)])
    clone = CloneConfig(epochs=300, batch_size=1, learning_rate=1e-2, final_learning_rate=1e-3)
    weights = clone_behavior(small_config, dataset, clone, seed=0)
    prediction = predict_normalized(weights, dataset.observations, dataset.robot_states)[0]
    assert float(np.mean((prediction - target) ** 2)) < 1e-3


def test_cloning_is_deterministic(small_config):
    dataset = collect_demonstrations(1, seed=2)
    clone = CloneConfig(episodes=1, epochs=2, batch_size=32)
    a = clone_behavior(small_config, dataset, clone, seed=3)
    b = clone_behavior(small_config, dataset, clone, seed=3)
    for key, value in a.parameters().items():
        np.testing.assert_array_equal(value, b.parameters()[key])


def test_cloning_rejects_empty_dataset(small_config):
    with pytest.raises(RejectedInputError):
        clone_behavior(small_config, DemoDataset.from_samples([]), CloneConfig(), seed=0)


# --- Bundles ---

def test_bundle_round_trip(tmp_path, small_config, small_weights):
    save_bundle(tmp_path, small_weights, metadata={"seed": 7})
    loaded = load_bundle(tmp_path)
    assert loaded.frozen and loaded.config == small_config
    state, frame = reset(3)
    assert UnscheduledPolicy(loaded).act(frame, state) == UnscheduledPolicy(small_weights).act(frame, state)


def test_bundle_detects_tampering(tmp_path, small_weights):
    save_bundle(tmp_path, small_weights)
    path = tmp_path / "readout.json"
    doc = json.loads(path.read_text())
    doc["frozen"] = not doc["frozen"]
    path.write_text(json.dumps(doc))
    with pytest.raises(RejectedInputError):
        load_bundle(tmp_path)


def test_missing_bundle(tmp_path):
    with pytest.raises(MissingCheckpointError):
        load_bundle(tmp_path / "nowhere")
