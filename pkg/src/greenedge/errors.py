"""Exception hierarchy shared by all modules."""


class GreenEdgeError(Exception):
    """Base class for library errors."""


class ConfigError(GreenEdgeError, ValueError):
    """Invalid configuration value. ``field`` names the offending key when known."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class DomainError(GreenEdgeError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConstraintViolation(GreenEdgeError):
    """A hard system constraint (VM count, rate, processing time) is broken."""


class InfeasibleError(GreenEdgeError):
    """No admissible value exists for the requested quantity."""


class TraceParseError(GreenEdgeError, ValueError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class TraceValidationError(GreenEdgeError, ValueError):
    pass


class TrainingError(GreenEdgeError):
    """Forecaster could not be fitted."""
