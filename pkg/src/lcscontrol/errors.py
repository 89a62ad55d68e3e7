"""Exception types shared across the package."""


class LcsControlError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(LcsControlError):
    """Inputs have inconsistent shapes or sizes."""


class NoSolution(LcsControlError):
    """The complementarity pivoting terminated without a solution.

    Raised on ray termination or when the pivot loop exceeds its
    iteration bound; never returned silently.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class InnerSolveFailed(LcsControlError):
    """The nonnegativity-constrained inner minimization did not converge."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class EmptyBuffer(LcsControlError):
    """An operation requiring transition data got an empty buffer."""


class SolveFailed(LcsControlError):
    """The trajectory optimizer stopped before reaching its tolerance.

    Carries the last iterate so callers can decide on a fallback.
    """

    def __init__(self, message, residual=None, solution=None):
        super().__init__(message)
        self.residual = residual
        self.solution = solution


class ConfigError(LcsControlError):
    """Malformed or inconsistent experiment configuration."""


class CheckpointError(LcsControlError):
    """Checkpoint file is unreadable or has an unsupported version."""
