"""
Centralized error handling for the planning service and the command line
"""

import logging
import traceback
from functools import wraps
from typing import Callable

from fastapi import HTTPException
from pydantic import ValidationError

from src.utils.errors import (
    ArchMismatchError,
    CheckpointError,
    CheckpointVersionError,
    ConfigError,
    CorruptCheckpointError,
    DegenerateGeometryError,
    InactiveRobotError,
    MalformedCommandError,
    MalformedScenarioError,
    NumericalDivergenceError,
    OvercrowdedArenaError,
    PlannerError,
    TraceFormatError,
    UnsupportedNodeError,
)

logger = logging.getLogger(__name__)

# (status code, short label); first matching class wins, so subclasses come first
_HTTP_STATUS: list[tuple[type[Exception], int, str]] = [
    (ArchMismatchError, 422, "Architecture mismatch"),
    (CheckpointVersionError, 422, "Unsupported checkpoint version"),
    (CorruptCheckpointError, 422, "Corrupt checkpoint"),
    (CheckpointError, 422, "Checkpoint error"),
    (FileNotFoundError, 404, "Not found"),
    (OvercrowdedArenaError, 409, "Overcrowded arena"),
    (MalformedScenarioError, 400, "Malformed scenario"),
    (DegenerateGeometryError, 400, "Degenerate geometry"),
    (InactiveRobotError, 400, "Inactive robot"),
    (MalformedCommandError, 400, "Malformed command"),
    (ConfigError, 400, "Invalid configuration"),
    (ValidationError, 400, "Invalid configuration"),
    (TraceFormatError, 400, "Invalid trace"),
    (UnsupportedNodeError, 500, "Unsupported graph node"),
    (NumericalDivergenceError, 500, "Numerical divergence"),
]

# CLI exit codes; 0 is reserved for fully written artifacts
_EXIT_CODES: list[tuple[type[Exception], int]] = [
    (ConfigError, 2),
    (ValidationError, 2),
    (FileNotFoundError, 3),
    (CheckpointError, 4),
    (MalformedScenarioError, 5),
    (OvercrowdedArenaError, 5),
    (TraceFormatError, 6),
    (NumericalDivergenceError, 7),
    (PlannerError, 8),
]


class PlannerErrorHandler:
    """Maps planning-stack exceptions onto HTTP responses and process exit codes"""

    @staticmethod
    def status_for(exc: Exception) -> tuple[int, str]:
        for exc_type, status_code, label in _HTTP_STATUS:
            if isinstance(exc, exc_type):
                return status_code, label
        return 500, "Internal server error"

    @staticmethod
    def exit_code_for(exc: Exception) -> int:
        for exc_type, code in _EXIT_CODES:
            if isinstance(exc, exc_type):
                return code
        return 1

    @staticmethod
    def log_error(operation_name: str, exc: Exception, identifier: str | None = None) -> None:
        """Client mistakes go to INFO, everything else to ERROR with a traceback"""
        status_code, _ = PlannerErrorHandler.status_for(exc)
        context = f"{operation_name}{f' for {identifier}' if identifier else ''}"
        if status_code < 500:
            logger.info(f"{type(exc).__name__} in {context}: {str(exc)}")
            return

        error_traceback = "".join(traceback.format_exception(type(exc), exc, exc.__traceback__))
        logger.error(
            f"{type(exc).__name__} in {context}: {str(exc)}\n"
            f"Traceback:\n{error_traceback}"
        )

    @staticmethod
    def to_http_exception(
        operation_name: str, exc: Exception, identifier: str | None = None
    ) -> HTTPException:
        status_code, label = PlannerErrorHandler.status_for(exc)
        if status_code >= 500 and not isinstance(exc, PlannerError):
            message = f"An unexpected error occurred while {operation_name.replace('_', ' ')}"
        else:
            message = str(exc)

        detail = {
            "error": label,
            "message": message,
            "operation": operation_name,
            "technical_details": type(exc).__name__,
        }
        if identifier:
            detail["identifier"] = identifier
        return HTTPException(status_code=status_code, detail=detail)

    @staticmethod
    def handle_common_errors(operation_name: str, identifier: str | None = None):
        """
        Decorator turning planning-stack errors into HTTPException responses

        Args:
            operation_name: Name of the operation for logging and error messages
            identifier: Optional identifier (scenario name, checkpoint path) for context
        """

        def decorator(func: Callable) -> Callable:
            @wraps(func)
            async def wrapper(*args, **kwargs):
                try:
                    return await func(*args, **kwargs)

                except HTTPException:
                    raise

                except Exception as e:
                    PlannerErrorHandler.log_error(operation_name, e, identifier)
                    raise PlannerErrorHandler.to_http_exception(
                        operation_name, e, identifier
                    ) from e

            return wrapper

        return decorator


# Convenience decorators for the routers
def handle_world_errors(func):
    """Decorator for scenario and observation endpoints"""
    return PlannerErrorHandler.handle_common_errors("world_operation")(func)


def handle_planning_errors(func):
    """Decorator for force-field endpoints"""
    return PlannerErrorHandler.handle_common_errors("force_resolution")(func)


def handle_evaluation_errors(func):
    """Decorator for episode and comparison endpoints"""
    return PlannerErrorHandler.handle_common_errors("evaluation")(func)
