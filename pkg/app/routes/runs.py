"""
Run API routes.
Runs execute synchronously; intended for small desk-scale configurations.
"""
from fastapi import APIRouter

from app.core.exceptions import SolverError
from app.core.logger import logger
from app.models.run import RunConfig, RunResult
from app.routes.errors import http_error
from app.services.driver import run

router = APIRouter(
    prefix="/api",
    tags=["runs"],
)


@router.post(
    "/runs",
    response_model=RunResult,
    summary="Run a Configuration",
    description="""
    Run a configuration to its end time (or `max_steps`) and return the
    output manifest. Outputs are written under the configured output
    directory exactly as for the command line.
    """,
)
def create_run(config: RunConfig) -> RunResult:
    """
    Raises:
        HTTPException: 400 for bad configurations, 422 for geometry failures,
            500 for failures during time stepping
    """
    logger.info(f"Run requested for '{config.problem}'")
    try:
        return run(config)
    except SolverError as e:
        raise http_error(e)
