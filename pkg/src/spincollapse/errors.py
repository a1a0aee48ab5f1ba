"""Exception hierarchy shared by every layer of the simulator.

Each class maps onto one CLI exit code (see :mod:`spincollapse.cli`).
"""


class SpinCollapseError(Exception):
    """Base class for all simulator errors."""


class UsageError(SpinCollapseError, ValueError):
    """An operation was called with arguments outside its contract."""


class ConfigError(SpinCollapseError, ValueError):
    """Invalid or unsupported configuration."""


class ConvergenceError(SpinCollapseError, RuntimeError):
    """An iterative solver did not reach its tolerance.

    ``best_residual`` carries the smallest residual seen before giving up.
    """

    def __init__(self, message, best_residual=float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class IntegrityError(SpinCollapseError, RuntimeError):
    """A conserved quantity drifted past its tolerance during evolution."""

    def __init__(self, message, step=-1, quantity="", drift=float("nan")):
        super().__init__(message)
        self.step = step
        self.quantity = quantity
        self.drift = drift
