"""
Exception hierarchy for the Pearcey lab.
Maps every failure class onto the exit code reported by the command line.
"""

from typing import Optional


class LabError(Exception):
    """Base class for all lab failures."""


class InvalidArgumentError(LabError, ValueError):
    """Bad sizes, ranges or malformed input."""


class NearDiagonalError(InvalidArgumentError):
    """Off-diagonal kernel formula requested too close to the diagonal."""

    def __init__(self, x: float, y: float, threshold: float):
        super().__init__(
            f"|x - y| = {abs(x - y):.3e} below {threshold:.0e} at (x, y) = ({x}, {y}); use kernel_diag"
        )
        self.x = x
        self.y = y


class PreconditionError(InvalidArgumentError):
    """A state or input violates the precondition of an operation."""


class DomainError(LabError, ValueError):
    """Argument outside the mathematical domain of a formula."""


class NumericError(LabError, ArithmeticError):
    """Non-finite or otherwise unusable floating point result."""

    def __init__(self, message: str, node: Optional[complex] = None):
        super().__init__(message)
        self.node = node


class RangeError(NumericError, OverflowError):
    """Value would overflow double precision."""


class StiffnessError(NumericError):
    """Integrator step size collapsed."""


class ConvergenceError(LabError, RuntimeError):
    """Discretization refinement did not settle within tolerance."""

    def __init__(self, message: str, estimate: Optional[float] = None):
        super().__init__(message)
        self.estimate = estimate


EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CONVERGENCE = 3
EXIT_NUMERIC = 4


def exit_code_for(exc: BaseException) -> int:
    """
    Translate an exception into a command-line exit code.

    Args:
        exc: Exception raised while running a command

    Returns:
        2 for invalid input, 3 for convergence or stiffness failures,
        4 for any other numeric failure
    """
    if isinstance(exc, (ConvergenceError, StiffnessError)):
        return EXIT_CONVERGENCE
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    if isinstance(exc, (InvalidArgumentError, DomainError, ValueError)):
        return EXIT_INVALID
    return EXIT_NUMERIC
