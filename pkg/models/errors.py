"""
Error hierarchy shared by every package.

Callers distinguish two families: bad arguments (RejectedInputError) and
operations attempted in a state that forbids them (RejectedStateError).
"""


class PhaseSchedError(Exception):
    """Base class for all errors raised by this project."""


class RejectedInputError(PhaseSchedError, ValueError):
    """An argument has the wrong shape, range, or content."""


class RejectedStateError(PhaseSchedError, RuntimeError):
    """The operation is not allowed in the current state (missing cache, done episode, ...)."""


class TrainingDivergedError(RejectedStateError):
    """PPO reward stayed below the initial baseline for too many consecutive updates."""


class MissingCheckpointError(RejectedInputError):
    """A required weight bundle or scheduler checkpoint does not exist."""
