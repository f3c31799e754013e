"""
Scheduler observation assembly.
"""

import numpy as np

from models import EnvState, ObservationFeatures, SchedulerObservation
from models.errors import RejectedInputError
from envsim import motion_signals


# Normalizers mapping each observation component to roughly unit scale.
RHO_GAIN = 10.0
SPEED_SCALES = (0.2, 0.05, 0.1)   # v_grip, v_trans, v_rot: the per-step clip bounds

POLICY_INPUT_SIZE = 5


def build_observation(rho_latest: float, prev: EnvState, cur: EnvState) -> SchedulerObservation:
    if not 0.0 <= rho_latest <= 1.0:
        raise RejectedInputError(f"rho must lie in [0, 1], got {rho_latest}")
    v_grip, v_trans, v_rot = motion_signals(prev, cur)
    return SchedulerObservation(
        rho=rho_latest, v_grip=v_grip, v_trans=v_trans, v_rot=v_rot,
        progress=cur.step_index / cur.max_steps,
    )


def policy_input(obs: SchedulerObservation,
                 features: ObservationFeatures = ObservationFeatures.ALL) -> np.ndarray:
    """
    Normalized network input. Ablated feature groups are zeroed;
    progress is always visible.
    """
    x = np.array([
        (1.0 - obs.rho) * RHO_GAIN,
        obs.v_grip / SPEED_SCALES[0],
        obs.v_trans / SPEED_SCALES[1],
        obs.v_rot / SPEED_SCALES[2],
        obs.progress,
    ])
    if features == ObservationFeatures.CKA_PROGRESS:
        x[1:4] = 0.0
    elif features == ObservationFeatures.SPEED_PROGRESS:
        x[0] = 0.0
    return x
