"""
Deterministic 2-D pick-and-place world.

The episode moves through four phases (approach, grasp, transport, place).
There is no physics: kinematics are integrated with clipped commands, the
grasp latches on proximity plus a closed gripper, and placement succeeds on
proximity plus an open gripper.
"""

import math
from typing import Tuple

import numpy as np

from models import ACTION_BOUNDS, EnvState, ObservationFrame, RobotAction, RejectedStateError
from numerics import Rng

T_MAX = 200
CONTACT_RADIUS = 0.02
GRASP_APERTURE = 0.2
RELEASE_APERTURE = 0.8
DISTRACTOR_STD = 0.01

# Sampling regions, disjoint along x by 0.3 m.
OBJECT_REGION = ((0.15, 0.35), (-0.25, 0.25))
GOAL_REGION = ((-0.35, -0.15), (-0.25, 0.25))

# Expert controller
EXPERT_GAIN = 0.5
ARRIVAL_TOLERANCE = 0.01


def wrap_angle(angle: float) -> float:
    """Wrap to [-pi, pi)."""
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def _dist(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def observe(state: EnvState) -> ObservationFrame:
    ex, ey = state.effector
    ox, oy = state.object_pos
    gx, gy = state.goal_pos
    noise = Rng.for_stream(state.seed, "distractor", state.step_index).gaussian(4) * DISTRACTOR_STD
    features = (
        ox - ex, oy - ey,
        gx - ex, gy - ey,
        gx - ox, gy - oy,
        _dist(state.effector, state.object_pos),
        _dist(state.effector, state.goal_pos),
        state.aperture,
        math.sin(state.orientation), math.cos(state.orientation),
        1.0 if state.holding else 0.0,
        *(float(n) for n in noise),
    )
    return ObservationFrame(features=features)


def reset(seed: int, max_steps: int = T_MAX) -> Tuple[EnvState, ObservationFrame]:
    """Fresh episode: effector at the origin, gripper open, object and goal sampled from their regions."""
    rng = Rng.for_stream(seed, "reset")
    (oxl, oxh), (oyl, oyh) = OBJECT_REGION
    (gxl, gxh), (gyl, gyh) = GOAL_REGION
    obj = (float(rng.uniform(oxl, oxh)), float(rng.uniform(oyl, oyh)))
    goal = (float(rng.uniform(gxl, gxh)), float(rng.uniform(gyl, gyh)))
    state = EnvState(object_pos=obj, goal_pos=goal, max_steps=max_steps, seed=seed)
    return state, observe(state)


def step(state: EnvState, action: RobotAction) -> Tuple[EnvState, ObservationFrame, bool, bool]:
    """Advance one control step. Returns (state, observation, done, success)."""
    if state.done:
        raise RejectedStateError(f"Episode {state.seed} is already done at step {state.step_index}")

    a = action.clipped()
    effector = (state.effector[0] + a.velocity[0], state.effector[1] + a.velocity[1])
    orientation = wrap_angle(state.orientation + a.orientation_rate)
    aperture = float(np.clip(state.aperture + a.aperture_rate, 0.0, 1.0))

    holding = state.holding
    object_pos = effector if holding else state.object_pos
    dropped = state.dropped
    success = False

    if holding and _dist(object_pos, state.goal_pos) < CONTACT_RADIUS and aperture > RELEASE_APERTURE:
        success = True
        holding = False
    elif holding and aperture > RELEASE_APERTURE:
        # Released away from the goal: the object stays where it was let go.
        holding = False
        dropped = True
    elif not holding and _dist(effector, object_pos) < CONTACT_RADIUS and aperture < GRASP_APERTURE:
        holding = True
        object_pos = effector

    step_index = state.step_index + 1
    done = success or step_index >= state.max_steps
    new_state = state.model_copy(update=dict(
        effector=effector, orientation=orientation, aperture=aperture,
        object_pos=object_pos, holding=holding, step_index=step_index,
        done=done, success=success, dropped=dropped,
    ))
    return new_state, observe(new_state), done, success


def expert_action(state: EnvState) -> RobotAction:
    """
    Phase-conditioned proportional controller: approach the object, close
    while aligning with the transport direction, carry to the goal, open.
    """
    align = math.atan2(state.goal_pos[1] - state.object_pos[1], state.goal_pos[0] - state.object_pos[0])
    rotation = EXPERT_GAIN * wrap_angle(align - state.orientation)

    target = state.goal_pos if state.holding else state.object_pos
    err = (target[0] - state.effector[0], target[1] - state.effector[1])
    arrived = math.hypot(*err) < ARRIVAL_TOLERANCE

    if state.holding:
        grip = ACTION_BOUNDS[3] if arrived else -ACTION_BOUNDS[3]
    else:
        grip = -ACTION_BOUNDS[3] if arrived else ACTION_BOUNDS[3]

    return RobotAction(
        velocity=(EXPERT_GAIN * err[0], EXPERT_GAIN * err[1]),
        orientation_rate=rotation,
        aperture_rate=grip,
    ).clipped()


def motion_signals(prev: EnvState, cur: EnvState) -> Tuple[float, float, float]:
    """(v_grip, v_trans, v_rot) between consecutive states; all non-negative."""
    v_grip = abs(cur.aperture - prev.aperture)
    v_trans = _dist(cur.effector, prev.effector)
    v_rot = abs(wrap_angle(cur.orientation - prev.orientation))
    return v_grip, v_trans, v_rot


def robot_state_vector(state: EnvState) -> np.ndarray:
    """s_t fed to the action head: effector xy, heading sin/cos, aperture, holding."""
    return np.array([
        state.effector[0], state.effector[1],
        math.sin(state.orientation), math.cos(state.orientation),
        state.aperture, 1.0 if state.holding else 0.0,
    ])


def task_potential(state: EnvState) -> float:
    """Remaining task distance; zero once placed."""
    if state.success:
        return 0.0
    if state.holding:
        return _dist(state.effector, state.goal_pos)
    return _dist(state.effector, state.object_pos) + _dist(state.object_pos, state.goal_pos)


def failure_reason(state: EnvState) -> str:
    """Terminal reason for an unsuccessful episode."""
    if state.success:
        return "success"
    if state.dropped:
        return "dropped"
    if state.holding:
        return "timeout"
    return "never_grasped"
