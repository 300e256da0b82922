"""Exception hierarchy shared by the library and the CLI.

Each CLI exit code maps onto exactly one of these classes (see ``cli.EXIT_CODES``).
"""


class WarpflowError(Exception):
    """Base class for every error raised by warpflow."""


class SingularMetric(WarpflowError):
    """Metric is not positive definite (Cholesky failed) or not invertible."""


class OutOfDomain(WarpflowError):
    """A finite-difference stencil leaves a non-periodic coordinate box."""


class InvalidSpec(WarpflowError, ValueError):
    """Warped-product or metric definition violates a structural constraint."""


class InvalidCoefficients(WarpflowError, ValueError):
    """Unified flow called with alpha = beta = 0 (static case is not a flow)."""


class SingularityReached(WarpflowError):
    """Flow hit the warping-function floor or the curvature ceiling.

    The offending state is attached as ``state`` so callers can dump it.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class UnstableStep(WarpflowError):
    """Step size violates the stability bound, or a step produced NaN/Inf."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class MissingVelocities(WarpflowError):
    """A second-order-in-time operation was given a state without velocities."""


class InsufficientSnapshots(WarpflowError):
    """Trajectory too short for the requested time differences."""


class NotEinsteinFiber(WarpflowError):
    """An operation needs an Einstein fiber (Ric = c g) but none was declared."""


class ConfigError(WarpflowError):
    """Malformed or inconsistent scenario configuration."""
