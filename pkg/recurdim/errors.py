# recurdim/errors.py
"""Exception hierarchy shared by the numerical modules and the CLI controller."""


class RecurdimError(Exception):
    """Base class for every error raised by recurdim."""
    exit_code = 1


class ValidationError(RecurdimError):
    """A descriptor failed to parse or a precondition was violated."""


class BracketError(ValidationError):
    """A Bowen root bracket could not be expanded far enough."""


class BudgetExceeded(RecurdimError):
    """An enumeration would exceed the configured cylinder or node budget."""
    exit_code = 2


class InvariantViolation(RecurdimError):
    """A construction invariant failed. This always indicates a bug."""
