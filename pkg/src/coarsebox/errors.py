"""Exception taxonomy shared by the library and the CLI.

Exit codes: 2 validation, 3 budget exhaustion, 4 infeasible stage.
"""

from __future__ import annotations


class CoarseboxError(Exception):
    exit_code = 1

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def payload(self) -> dict:
        return {
            "error": type(self).__name__,
            "message": str(self),
            "details": {k: v for k, v in sorted(self.details.items())},
        }


class ValidationError(CoarseboxError):
    """Malformed input or violated precondition."""

    exit_code = 2


class BudgetError(CoarseboxError):
    """An explicit computation budget was exhausted."""

    exit_code = 3


class InfeasibleError(CoarseboxError):
    """A stage has no solution (e.g. an empty map space)."""

    exit_code = 4
