"""Energy-aware control of solar-powered base stations with co-located MEC servers."""

from greenedge.errors import (
    ConfigError,
    ConstraintViolation,
    DomainError,
    InfeasibleError,
    TraceParseError,
    TraceValidationError,
    TrainingError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConstraintViolation",
    "DomainError",
    "InfeasibleError",
    "TraceParseError",
    "TraceValidationError",
    "TrainingError",
]
