"""Exception types shared across the package.

The CLI maps these onto process exit codes, so runtime failures carry
enough structure (e.g. the simulated time of a divergence) to produce a
useful diagnostic without re-running anything.
"""

from __future__ import annotations


class Se23NavError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(Se23NavError, ValueError):
    """An argument violates a documented precondition (shape, norm, range)."""


class InsufficientLandmarksError(Se23NavError):
    """Fewer than three landmarks were supplied."""


class CollinearLandmarksError(Se23NavError):
    """The weighted landmark geometry is degenerate (rank of M below 2)."""


class ConfigurationUnsupportedError(Se23NavError):
    """The landmark geometry does not admit the requested reset design.

    Raised when neither lower-bound branch for the separation constant
    applies, or when a transformation-set policy's precondition fails.
    """


class RiccatiDivergenceError(Se23NavError):
    """The Riccati solution lost positive definiteness.

    Attributes
    ----------
    time : float
        Simulated time at which the Cholesky factorization failed.
    """

    def __init__(self, time: float, message: str = ""):
        self.time = float(time)
        super().__init__(message or f"Riccati solution not positive definite at t={time:.6f}")


class DivergenceError(Se23NavError):
    """An estimate error norm exceeded the divergence guard."""

    def __init__(self, time: float, message: str = ""):
        self.time = float(time)
        super().__init__(message or f"estimate diverged at t={time:.6f}")


class JumpCycleError(Se23NavError):
    """More consecutive resets were requested at one instant than candidates exist."""


class SchemaError(Se23NavError, ValueError):
    """A scenario file or CSV input violates the documented schema."""
