"""Exception hierarchy shared across the package."""


class SemsplatError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(SemsplatError, ValueError):
    """A numeric or structural argument violates a documented precondition."""


class InvalidStateError(SemsplatError, RuntimeError):
    """An operation was invoked before its required state existed."""


class NotFoundError(SemsplatError, KeyError):
    """A referenced object/entry does not exist."""


class ValidationError(SemsplatError, ValueError):
    """Structured validation failure (layout programs, region trees, plans).

    Carries an optional statement index so planner diagnostics can point at
    the offending line of an executable plan.
    """

    def __init__(self, message, statement_index=None, source=None):
        super().__init__(message)
        self.statement_index = statement_index
        self.source = source

    def __str__(self):
        base = super().__str__()
        if self.statement_index is not None:
            base = f"statement {self.statement_index}: {base}"
        if self.source:
            base = f"{self.source}: {base}"
        return base


class ConfigError(SemsplatError, ValueError):
    """Bad configuration or missing environment (API keys, endpoints)."""


class OracleError(SemsplatError, RuntimeError):
    """A guidance-oracle call failed after the configured retries."""

    def __init__(self, message, retries=0):
        super().__init__(message)
        self.retries = retries
