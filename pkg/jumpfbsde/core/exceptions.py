"""
Exception hierarchy for jumpfbsde.

Each exception carries the exit code the command line interface maps it to.
"""

from typing import Optional


class JumpFbsdeError(Exception):
    """Base class for all errors raised by the package."""

    exit_code: int = 1


class ConfigurationError(JumpFbsdeError, ValueError):
    """
    Invalid experiment configuration or coefficient specification.

    Attributes:
        key: Dotted config path of the offending entry, when known
    """

    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        if key:
            message = f"{key}: {message}"
        super().__init__(message)


class DomainError(JumpFbsdeError, ValueError):
    """A formula was evaluated outside its mathematical domain."""

    exit_code = 3


class NumericalRangeError(JumpFbsdeError, ArithmeticError):
    """Overflow or a non-finite value where a finite one is required."""

    exit_code = 3


class StrategyEvaluationError(JumpFbsdeError):
    """
    A strategy failed (or returned a non-finite value) while integrating wealth.

    Attributes:
        step: Grid step index at which the evaluation failed
        path: First offending path index, None if the failure is not path-specific
    """

    exit_code = 3

    def __init__(self, message: str, step: int, path: Optional[int] = None):
        self.step = step
        self.path = path
        location = f"step {step}" if path is None else f"step {step}, path {path}"
        super().__init__(f"{message} ({location})")


class VerificationError(JumpFbsdeError):
    """A requested verification check failed its acceptance band."""

    exit_code = 4
