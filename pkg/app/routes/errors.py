"""
Mapping of solver errors to HTTP errors.
"""
from fastapi import HTTPException, status

from app.core.exceptions import (
    ConfigurationError,
    DecompositionError,
    DomainError,
    GeometryError,
    SolverError,
    UsageError,
)
from app.core.logger import logger

_STATUS = (
    ((UsageError, ConfigurationError, DomainError), status.HTTP_400_BAD_REQUEST),
    ((GeometryError, DecompositionError), status.HTTP_422_UNPROCESSABLE_ENTITY),
)


def status_for(error: SolverError) -> int:
    for kinds, code in _STATUS:
        if isinstance(error, kinds):
            return code
    return status.HTTP_500_INTERNAL_SERVER_ERROR


def http_error(error: SolverError) -> HTTPException:
    """``HTTPException`` whose detail is the error's JSON form."""
    code = status_for(error)
    if code >= 500:
        logger.error(f"Solver failure: {error}")
    else:
        logger.warning(f"Rejected request: {error}")
    return HTTPException(status_code=code, detail=error.to_dict())
