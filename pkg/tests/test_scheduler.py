import numpy as np
import pytest

from models import (
    FULL_COMPUTE,
    JOINT_ACTIONS,
    ComputeAction,
    ObservationFeatures,
    PpoConfig,
    RewardConfig,
    SchedulerObservation,
    TeacherConfig,
)
from models.errors import MissingCheckpointError, RejectedInputError, RejectedStateError
from numerics import Rng
from executor import BackboneCache
from scheduler.checkpoint import load_checkpoint, save_checkpoint
from scheduler.constraints import COLD_START, RESTRICTED, SKIP_WINDOW, ActionMask, build_mask, check_action
from scheduler.engine import SchedulerTrainer, train_scheduler
from scheduler.policy import MaskedCategorical, SchedulerPolicy, policy_forward, uniform_distribution
from scheduler.ppo import (
    PpoOptimizer,
    RolloutBatch,
    compute_gae,
    policy_loss,
    policy_loss_and_grads,
    value_loss,
    value_loss_and_grads,
)
from scheduler.rollout import StepRecord, run_episode
from scheduler.schedules import FullSchedule, PolicySchedule, RandomSchedule, ThresholdSchedule
from scheduler.scoring import Transition, reuse_horizon, stage1_reward, stage2_reward
from scheduler.state import TrainingState, UpdateRecord
from scheduler.teacher import teacher_action, teacher_levels


def act(b, h):
    return ComputeAction(backbone=b, head=h)


def obs(rho=1.0, v_grip=0.0, v_trans=0.0, v_rot=0.0, progress=0.0):
    return SchedulerObservation(rho=rho, v_grip=v_grip, v_trans=v_trans, v_rot=v_rot, progress=progress)


# --- GAE ---

def test_gae_three_step_example():
    adv, ret = compute_gae([1.0, 2.0, 3.0], [0.5, 1.0, 1.5], [False, False, True], gamma=0.9, lam=0.8)
    np.testing.assert_allclose(adv, [3.8696, 3.43, 1.5], rtol=0, atol=1e-12)
    np.testing.assert_allclose(ret, [4.3696, 4.43, 3.0], rtol=0, atol=1e-12)


def test_gae_stops_at_episode_boundaries():
    adv, _ = compute_gae([1.0, 1.0], [0.0, 5.0], [True, True], gamma=0.99, lam=0.95)
    np.testing.assert_allclose(adv, [1.0, -4.0])


def test_gae_rejects_misaligned_inputs():
    with pytest.raises(RejectedInputError):
        compute_gae([1.0, 2.0], [0.0], [False, True], 0.99, 0.95)


# --- Rewards ---

# (executed, teacher, potential before, after, success, decision step, step cost, stage-1 reward)
REWARD_CASES = [
    (act(0, 0), act(0, 0), 0.50, 0.45, False, True, 1.00, -0.05),
    (act(1, 0), act(0, 0), 0.40, 0.38, False, True, 0.50, -0.08),
    (act(2, 1), act(2, 1), 0.30, 0.29, False, True, 0.10, -0.01),
    (act(4, 2), act(1, 0), 0.20, 0.20, False, True, 0.01, -0.281),
    (act(4, 2), act(4, 0), 0.20, 0.19, False, False, 0.01, -0.091),
    (act(0, 0), act(0, 0), 0.01, 0.00, True, True, 1.00, 9.91),
    (act(3, 0), act(0, 2), 0.60, 0.65, False, True, 0.05, -0.325),
    (act(1, 1), act(1, 1), 0.10, 0.05, False, True, 0.40, 0.01),
    (act(0, 2), act(0, 0), 0.33, 0.30, False, True, 0.90, -0.16),
    (act(2, 0), act(3, 0), 0.05, 0.00, True, True, 0.20, 9.97),
]


@pytest.mark.parametrize("executed,teacher,before,after,success,decision,cost,expected", REWARD_CASES)
def test_stage1_reward_by_hand(executed, teacher, before, after, success, decision, cost, expected):
    t = Transition(executed, before, after, success, decision)
    assert stage1_reward(t, teacher, cost, RewardConfig()) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("executed,teacher,before,after,success,decision,cost,expected", REWARD_CASES)
def test_stage2_matches_stage1_under_agreement(executed, teacher, before, after, success, decision, cost, expected):
    t = Transition(executed, before, after, success, decision)
    r1 = stage1_reward(t, teacher, cost, RewardConfig())
    r2 = stage2_reward(t, cost, RewardConfig())
    if executed == teacher and executed.backbone in (0, 1):
        assert r1 == r2
    else:
        assert r2 >= r1


def test_reuse_horizon_counts_decision_steps_only():
    assert reuse_horizon(Transition(act(4, 0), 0.0, 0.0)) == 3
    assert reuse_horizon(Transition(act(2, 0), 0.0, 0.0)) == 1
    assert reuse_horizon(Transition(act(1, 0), 0.0, 0.0)) == 0
    assert reuse_horizon(Transition(act(4, 0), 0.0, 0.0, decision_step=False)) == 0


# --- Masks ---

def test_mask_construction_and_projection():
    with pytest.raises(RejectedStateError):
        ActionMask(np.zeros(JOINT_ACTIONS, dtype=bool))
    cold = build_mask(BackboneCache(), 0)
    assert cold.constraint_type == COLD_START and cold.valid_indices() == [0]
    window = ActionMask.fixed_backbone(3)
    assert window.project(act(0, 2)) == act(3, 2)
    assert ActionMask.only([act(0, 0).index, act(2, 0).index]).project(act(1, 1)) == act(0, 0)
    assert ActionMask.full().restrict_head(0).head_levels(4) == [0]


def test_mask_violations_name_the_constraint():
    assert check_action(ActionMask.full(), act(4, 2)) is None
    v = check_action(build_mask(BackboneCache(), 0), act(1, 0), step=0)
    assert v.constraint_type == COLD_START
    v = check_action(ActionMask.fixed_backbone(2), act(0, 0), step=5)
    assert v.constraint_type == SKIP_WINDOW and v.step == 5
    v = check_action(ActionMask.full().restrict_backbone(0), act(1, 0))
    assert v.constraint_type == RESTRICTED


def test_masked_sampling_never_returns_invalid_actions():
    rng = Rng(123)
    for trial in range(20):
        valid = rng.uniform(0, 1, JOINT_ACTIONS) < 0.4
        valid[rng.integers(0, JOINT_ACTIONS)] = True
        logits = rng.gaussian(JOINT_ACTIONS) * 3.0
        dist = MaskedCategorical(logits, valid)
        draws = np.array([dist.sample(rng) for _ in range(5000)])
        assert valid[draws].all()
        assert np.isclose(dist.probs.sum(), 1.0)
        assert np.all(dist.probs[~valid] == 0.0)


def test_skip_window_pins_the_backbone_component():
    rng = Rng(5)
    mask = ActionMask.fixed_backbone(4)
    dist = MaskedCategorical(rng.gaussian(JOINT_ACTIONS), mask)
    assert {ComputeAction.from_index(dist.sample(rng)).backbone for _ in range(2000)} == {4}


def test_masked_categorical_queries():
    dist = uniform_distribution(ActionMask.only([0, 4, 7]))
    assert dist.entropy() == pytest.approx(np.log(3))
    assert dist.log_prob(4) == pytest.approx(-np.log(3))
    with pytest.raises(RejectedStateError):
        dist.log_prob(1)
    with pytest.raises(RejectedInputError):
        MaskedCategorical(np.full(JOINT_ACTIONS, np.nan), ActionMask.full())


# --- Teacher ---

def test_teacher_threshold_mapping():
    cfg = TeacherConfig()
    assert teacher_levels(obs(rho=0.999), cfg)[0] == 4
    assert teacher_levels(obs(rho=0.992), cfg)[0] == 3
    assert teacher_levels(obs(rho=0.98), cfg)[0] == 2
    assert teacher_levels(obs(rho=0.95), cfg)[0] == 1
    assert teacher_levels(obs(rho=0.5), cfg)[0] == 0
    assert teacher_levels(obs(v_trans=0.04, v_grip=0.0), cfg)[1] == 2
    assert teacher_levels(obs(v_trans=0.04, v_grip=0.1), cfg)[1] == 1
    assert teacher_levels(obs(v_trans=0.02), cfg)[1] == 1
    assert teacher_levels(obs(v_trans=0.0), cfg)[1] == 0


def test_teacher_is_projected_onto_the_mask():
    cfg = TeacherConfig()
    assert teacher_action(obs(rho=1.0, v_trans=0.04), build_mask(BackboneCache(), 0), cfg) == FULL_COMPUTE
    assert teacher_action(obs(rho=0.5), ActionMask.fixed_backbone(3), cfg) == act(3, 0)


def test_teacher_config_validation():
    with pytest.raises(ValueError):
        TeacherConfig(rho_thresholds=(0.9, 0.95, 0.97, 0.99))


# --- Policy and PPO gradients ---

def make_batch(policy, seed, n=12):
    rng = Rng.for_stream(seed, "ppo-batch")
    inputs = rng.gaussian(n * 5).reshape(n, 5)
    masks = rng.uniform(0, 1, (n, JOINT_ACTIONS)) < 0.6
    masks[:, 0] = True
    actions, log_probs = [], []
    for i in range(n):
        dist = MaskedCategorical(policy.policy_net.apply(inputs[i]), masks[i])
        a = dist.sample(rng)
        actions.append(a)
        log_probs.append(dist.log_prob(a) + 0.05 * rng.gaussian(1)[0])
    return RolloutBatch(inputs, masks, np.asarray(actions), np.asarray(log_probs),
                        rng.gaussian(n), rng.gaussian(n))


def numeric_grads(loss, params, eps=1e-6):
    out = {}
    for key, arr in params.items():
        grad = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), grad.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            up = loss()
            flat[i] = old - eps
            down = loss()
            flat[i] = old
            gflat[i] = (up - down) / (2 * eps)
        out[key] = grad
    return out


def relative_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-10)


@pytest.mark.parametrize("trial", range(50))
def test_policy_and_value_gradients_match_finite_differences(trial):
    ppo = PpoConfig(hidden=(8, 8), entropy_coef=0.05)
    policy = SchedulerPolicy.initialize(ppo, Rng.for_stream(trial, "policy-gradcheck"))
    policy.policy_net.weights[-1] *= 100.0
    batch = make_batch(policy, trial)

    _, grads, _ = policy_loss_and_grads(policy, batch, ppo)
    numeric = numeric_grads(lambda: policy_loss(policy, batch, ppo), policy.policy_net.parameters())
    for key in numeric:
        assert relative_error(grads[key], numeric[key]) < 1e-4, key

    _, v_grads = value_loss_and_grads(policy, batch, ppo)
    numeric = numeric_grads(lambda: value_loss(policy, batch, ppo), policy.value_net.parameters())
    for key in numeric:
        assert relative_error(v_grads[key], numeric[key]) < 1e-4, key


def test_initial_policy_is_near_uniform():
    policy = SchedulerPolicy.initialize(PpoConfig(), Rng(0))
    dist, value = policy_forward(policy, obs(rho=0.9, v_trans=0.02, progress=0.5), ActionMask.full())
    assert np.allclose(dist.probs, 1.0 / JOINT_ACTIONS, atol=1e-2)
    assert np.isfinite(value)


def test_ppo_update_is_deterministic_and_moves_parameters():
    ppo = PpoConfig(hidden=(8, 8), minibatch_size=4, epochs=2)
    base = SchedulerPolicy.initialize(ppo, Rng(1))
    batch = make_batch(base, 9)
    results = []
    for _ in range(2):
        policy = base.copy()
        stats = PpoOptimizer(policy, ppo).update(policy, batch, Rng(2))
        results.append((policy, stats))
    (a, sa), (b, sb) = results
    assert sa == sb
    for key, value in a.policy_net.parameters().items():
        np.testing.assert_array_equal(value, b.policy_net.parameters()[key])
    assert not np.array_equal(a.policy_net.weights[0], base.policy_net.weights[0])


# --- Rollouts ---

def test_full_schedule_episode(small_weights):
    result = run_episode(0, FullSchedule(), small_weights, max_steps=20)
    assert result.steps == 20
    assert result.speedup == 1.0
    assert all(r.backbone == 0 and r.head == 0 for r in result.records)
    assert set(StepRecord.columns()) >= {"rho", "v_grip", "v_trans", "v_rot", "progress", "step_cost"}


def test_episodes_are_deterministic(small_weights):
    a = run_episode(3, RandomSchedule(Rng(4)), small_weights, max_steps=25)
    b = run_episode(3, RandomSchedule(Rng(4)), small_weights, max_steps=25)
    assert [r.as_row() for r in a.records] == [r.as_row() for r in b.records]
    assert a.rewards_stage1 == b.rewards_stage1


def test_random_schedule_respects_windows(small_weights):
    result = run_episode(5, RandomSchedule(Rng(6)), small_weights, max_steps=60)
    records = result.records
    assert records[0].backbone == 0 and records[0].head == 0
    for prev, cur in zip(records, records[1:]):
        if prev.skip_remaining > 0:
            assert cur.forced and cur.backbone == prev.backbone
    assert result.speedup > 1.0


def test_threshold_schedule_runs_with_shadow_probe(small_weights):
    result = run_episode(1, ThresholdSchedule(TeacherConfig()), small_weights, max_steps=15, shadow=True)
    assert result.records[0].cka_first is None
    assert all(0.0 <= r.cka_first <= 1.0 for r in result.records[1:])
    assert all(r.backbone == r.teacher_backbone and r.head == r.teacher_head for r in result.records)


def test_policy_schedule_restrictions(small_weights):
    policy = SchedulerPolicy.initialize(PpoConfig(), Rng(3))
    llm_full = run_episode(2, PolicySchedule(policy, backbone_level=0), small_weights, max_steps=20)
    assert all(r.backbone == 0 for r in llm_full.records)
    ah_full = run_episode(2, PolicySchedule(policy, head_level=0), small_weights, max_steps=20)
    assert all(r.head == 0 for r in ah_full.records)


# --- Training ---

def tiny_ppo(**overrides):
    values = dict(hidden=(8, 8), episodes_per_update=2, updates=2, minibatch_size=64, epochs=1,
                  divergence_patience=50)
    values.update(overrides)
    return PpoConfig(**values)


def test_stage_two_requires_stage_one_policy(small_weights):
    with pytest.raises(RejectedInputError):
        SchedulerTrainer(small_weights, tiny_ppo(stage=2), RewardConfig(), TeacherConfig(), seed=0)


def test_two_stage_training_runs_and_checkpoints(tmp_path, small_weights):
    policy1, state1 = train_scheduler(small_weights, tiny_ppo(stage=1), RewardConfig(), TeacherConfig(), seed=0)
    assert len(state1.updates) == 2
    assert state1.baseline_reward is not None
    path = save_checkpoint(tmp_path / "stage1.json", policy1, 1, 0, "abc", state1.get_statistics())

    restored = load_checkpoint(path)
    assert restored.stage == 1 and restored.config_hash == "abc"
    init = restored.to_policy()
    x = obs(rho=0.95, v_trans=0.01)
    np.testing.assert_array_equal(init.policy_net.apply(init.inputs(x)), policy1.policy_net.apply(policy1.inputs(x)))

    policy2, state2 = train_scheduler(small_weights, tiny_ppo(stage=2), RewardConfig(), TeacherConfig(),
                                      seed=0, init_policy=init)
    assert state2.stage == 2 and len(state2.updates) == 2
    assert policy2 is not init

    csv_path = tmp_path / "log.csv"
    state2.write_csv(csv_path)
    assert len(csv_path.read_text().strip().splitlines()) == 3


def test_zero_learning_rate_leaves_parameters_unchanged(small_weights):
    trainer = SchedulerTrainer(small_weights, tiny_ppo(learning_rate=0.0, updates=3), RewardConfig(),
                               TeacherConfig(), seed=2)
    nets = (trainer.policy.policy_net, trainer.policy.value_net)
    before = [{k: v.copy() for k, v in net.parameters().items()} for net in nets]
    policy, state = trainer.run()
    assert len(state.updates) == 3
    for snapshot, net in zip(before, (policy.policy_net, policy.value_net)):
        for key, value in net.parameters().items():
            np.testing.assert_array_equal(value, snapshot[key])


def test_training_with_ablated_observations(small_weights):
    policy, _ = train_scheduler(small_weights, tiny_ppo(updates=1, observation_features=ObservationFeatures.CKA_PROGRESS),
                                RewardConfig(), TeacherConfig(), seed=1)
    assert policy.features == ObservationFeatures.CKA_PROGRESS


def test_missing_checkpoint(tmp_path):
    with pytest.raises(MissingCheckpointError):
        load_checkpoint(tmp_path / "stage2.json")


def update(i, reward):
    return UpdateRecord(update=i, stage=1, episodes=1, steps=1, mean_reward=reward, mean_speedup=1.0,
                        success_rate=0.0, policy_loss=0.0, value_loss=0.0, entropy=0.0,
                        clip_fraction=0.0, grad_norm=0.0)


def test_divergence_streak_tracking():
    state = TrainingState(stage=1, seed=0)
    state.baseline_reward = 0.0
    state.record_update(update(0, -1.0))
    state.record_update(update(1, -2.0))
    assert state.below_baseline_streak == 2
    state.record_update(update(2, 1.0))
    assert state.below_baseline_streak == 0
    stats = state.get_statistics()
    assert stats["best_update"] == 2 and stats["updates"] == 3
