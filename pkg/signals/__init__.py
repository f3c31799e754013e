"""
Stability probe (CKA) and scheduler observation assembly.
"""

from .cka import cka, center_columns
from .observation import POLICY_INPUT_SIZE, build_observation, policy_input

__all__ = [
    "cka",
    "center_columns",
    "POLICY_INPUT_SIZE",
    "build_observation",
    "policy_input",
]
