"""
Custom exception classes for the allocator.

These exceptions provide a consistent way to handle and report errors
throughout the package. Each one carries the process exit code that the CLI
returns when it escapes a subcommand: 1 for bad input or configuration, 2 for
instances that admit no feasible allocation.
"""
from typing import Optional


class AppException(Exception):
    """
    Base exception class for all application-specific exceptions.

    This exception is caught by `app.main.cli_main` and converted into an
    error message on stderr plus the exit code stored on the instance.
    """

    def __init__(self, detail: str, exit_code: int = 1):
        """
        Initialize the application exception.

        Args:
            detail: A human-readable description of the error
            exit_code: Process exit code to return from the CLI (default: 1)
        """
        self.detail = detail
        self.exit_code = exit_code
        super().__init__(detail)


class ConfigError(AppException):
    """Raised when an experiment config file is malformed or has unknown keys."""

    def __init__(self, detail: str = "Invalid configuration", field_path: Optional[str] = None):
        self.field_path = field_path
        message = f"{field_path}: {detail}" if field_path else detail
        super().__init__(detail=message, exit_code=1)


class InvalidInputError(AppException):
    """Raised when an operation receives values outside its domain."""

    def __init__(self, detail: str = "Invalid input"):
        super().__init__(detail=detail, exit_code=1)


class InvalidChannel(InvalidInputError):
    """Channel parameters give a zero, negative or non-finite achievable rate."""


class InvalidDistance(InvalidInputError):
    """A learner distance is not strictly positive."""


class InvalidScenario(InvalidInputError):
    """Learner counts, sequence lengths or problem bounds are inconsistent."""


class InvalidMultipliers(InvalidInputError):
    """Lagrange multipliers are negative or sized for a different pair set."""


class InvalidModel(InvalidInputError):
    """Model vectors or loss matrices disagree in dimension."""


class DegenerateMultiplier(InvalidInputError):
    """A closed-form KKT expression would divide by a zero time multiplier."""


class EnumerationGuardError(InvalidInputError):
    """The brute-force oracle was asked for an instance larger than it enumerates."""


class InfeasibleError(AppException):
    """Base class for instances that admit no feasible allocation."""

    def __init__(self, detail: str = "Infeasible instance"):
        super().__init__(detail=detail, exit_code=2)


class InfeasibleLearner(InfeasibleError):
    """A single learner cannot fit even the smallest batch into the cycle budget."""

    def __init__(self, learner: int, detail: Optional[str] = None):
        self.learner = learner
        super().__init__(
            detail or f"Learner {learner} cannot finish the model exchange and one batch within T"
        )


class InfeasibleProblem(InfeasibleError):
    """No allocation satisfies the batch-sum, batch-bound and time constraints together."""


class NoCertificate(AppException):
    """The stationarity system could not be satisfied to tolerance (diagnostic only)."""

    def __init__(self, residual: float, detail: Optional[str] = None):
        self.residual = residual
        super().__init__(
            detail=detail or f"No KKT certificate: stationarity residual {residual:.3e}",
            exit_code=2,
        )


class AllocationInvariantError(AppException):
    """An allocation failed re-validation against its problem before being written."""

    def __init__(self, detail: str = "Allocation violates problem invariants"):
        super().__init__(detail=detail, exit_code=1)
