"""Harness error types and the CLI exit-code mapping."""

from __future__ import annotations

from blindfold.errors import (
    AuditViolationError,
    InvalidRegimeError,
    NoAmplificationError,
    NonConvergenceError,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID_REGIME = 2
EXIT_AUDIT = 3
EXIT_NON_CONVERGENCE = 4


class LabError(Exception):
    """Base error for harness operations."""

    code: str
    exit_code: int = EXIT_FAILURE

    def __init__(self, message: str) -> None:
        self.message = message
        super().__init__(message)

    def to_dict(self) -> dict:
        return {"error": self.code, "message": self.message}


class OracleTooLargeError(LabError):
    code = "ORACLE_TOO_LARGE"


class BudgetExceededError(LabError):
    """Search stopped early; *partial* holds what was found so far."""

    code = "BUDGET_EXCEEDED"

    def __init__(self, message: str, partial: object = None) -> None:
        self.partial = partial
        super().__init__(message)


class UsageError(LabError):
    code = "USAGE"
    exit_code = EXIT_INVALID_REGIME


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, LabError):
        return exc.exit_code
    if isinstance(exc, (InvalidRegimeError, NoAmplificationError)):
        return EXIT_INVALID_REGIME
    if isinstance(exc, AuditViolationError):
        return EXIT_AUDIT
    if isinstance(exc, NonConvergenceError):
        return EXIT_NON_CONVERGENCE
    return EXIT_FAILURE
