"""
Trajectory logging: one CSV row per control step.
"""

import csv
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Iterable, List

from models import EnvState, RobotAction
from .world import expert_action, motion_signals, reset, step


@dataclass
class TrajectoryRow:
    step: int
    effector_x: float
    effector_y: float
    orientation: float
    aperture: float
    object_x: float
    object_y: float
    goal_x: float
    goal_y: float
    holding: bool
    action_vx: float
    action_vy: float
    action_rotation: float
    action_aperture: float
    v_grip: float
    v_trans: float
    v_rot: float
    done: bool
    success: bool

    @classmethod
    def from_transition(cls, prev: EnvState, action: RobotAction, cur: EnvState) -> "TrajectoryRow":
        a = action.clipped()
        v_grip, v_trans, v_rot = motion_signals(prev, cur)
        return cls(
            step=cur.step_index,
            effector_x=cur.effector[0], effector_y=cur.effector[1],
            orientation=cur.orientation, aperture=cur.aperture,
            object_x=cur.object_pos[0], object_y=cur.object_pos[1],
            goal_x=cur.goal_pos[0], goal_y=cur.goal_pos[1],
            holding=cur.holding,
            action_vx=a.velocity[0], action_vy=a.velocity[1],
            action_rotation=a.orientation_rate, action_aperture=a.aperture_rate,
            v_grip=v_grip, v_trans=v_trans, v_rot=v_rot,
            done=cur.done, success=cur.success,
        )


def write_trajectory_csv(path: Path, rows: Iterable[TrajectoryRow]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=[f.name for f in fields(TrajectoryRow)])
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))


def rollout(seed: int, policy: Callable[[EnvState], RobotAction] = expert_action) -> List[TrajectoryRow]:
    """Run `policy` (the expert by default) until the episode ends."""
    state, _ = reset(seed)
    rows = []
    while not state.done:
        action = policy(state)
        nxt, _, _, _ = step(state, action)
        rows.append(TrajectoryRow.from_transition(state, action, nxt))
        state = nxt
    return rows
