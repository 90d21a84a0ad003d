"""
Error hierarchy for the fcflow solver.

Every error carries a short machine-readable ``code`` and a ``context`` dict
so the CLI can emit it as one JSON line and the HTTP layer can map it to a
status code.
"""
from typing import Any


class SolverError(Exception):
    """Base class for all solver errors."""

    code = "solver_error"

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def with_context(self, **context: Any) -> "SolverError":
        """Attach extra context (patch, subpatch, time) while propagating."""
        for key, value in context.items():
            self.context.setdefault(key, value)
        return self

    def __reduce__(self):
        return (self.__class__, (self.message,), self.__dict__)

    def to_dict(self) -> dict[str, Any]:
        return {
            "error": self.code,
            "message": self.message,
            "context": {k: _jsonable(v) for k, v in self.context.items()},
        }

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} ({details})"


class ConfigurationError(SolverError):
    code = "configuration_error"


class UsageError(SolverError):
    code = "usage_error"


class GeometryError(SolverError):
    code = "geometry_error"


class DecompositionError(SolverError):
    code = "decomposition_error"


class InvalidStateError(SolverError):
    """Nonpositive density or pressure, or nonfinite values."""

    code = "invalid_state"


class DomainError(SolverError):
    """Input outside the domain of a closed-form relation (e.g. detached shock)."""

    code = "domain_error"


class TrainingError(SolverError):
    code = "training_error"


class TransportError(SolverError):
    code = "transport_error"


def _jsonable(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if hasattr(value, "tolist"):
        return value.tolist()
    return str(value)


__all__ = [
    "SolverError",
    "ConfigurationError",
    "UsageError",
    "GeometryError",
    "DecompositionError",
    "InvalidStateError",
    "DomainError",
    "TrainingError",
    "TransportError",
]
