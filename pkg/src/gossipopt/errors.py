"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An argument violates a documented precondition (shape, range, emptiness)."""


class ConfigurationError(ValueError):
    """A run or component configuration is invalid.

    ``field`` carries the dotted path of the offending setting when known.
    """

    def __init__(self, message: str, field: str | None = None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class ParseError(ValueError):
    """Malformed input text; ``line`` is the 1-based offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class TopologyError(ValueError):
    """The communication graph or its mixing matrix is unusable."""


class MetricsError(RuntimeError):
    """A tracked quantity became non-finite; the run must abort."""
