"""Exception hierarchy shared by all fscl modules."""


class FsclError(Exception):
    """Base class for every error raised by fscl."""


class ConfigurationError(FsclError, ValueError):
    """Invalid grid, operator, or experiment configuration."""

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = list(errors) if errors else [message]


class ShapeError(FsclError, ValueError):
    """Arrays or grids that should match do not."""


class UnsupportedGridError(FsclError, ValueError):
    """The requested path needs a power-of-two grid."""


class BracketError(FsclError, ValueError):
    """Field values fall outside the kinetic-variable grid."""


class UnusableTrajectoryError(FsclError, ValueError):
    """A trajectory lacks the recorded data a diagnostic needs."""


class InvalidPairingError(FsclError, ValueError):
    """Paired configurations differ in more than their initial data."""


class SolverDivergenceError(FsclError, RuntimeError):
    """The time integrator produced a non-finite state."""

    def __init__(self, step_index, message=None):
        self.step_index = step_index
        super().__init__(message or f"non-finite state at step {step_index}")
