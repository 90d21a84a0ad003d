"""
Problem and mesh API routes.
"""
from fastapi import APIRouter

from app.core.config import settings
from app.core.exceptions import SolverError
from app.core.logger import logger
from app.models.mesh import MeshValidationRequest, MeshValidationResponse
from app.routes.errors import http_error
from app.services.decomposition import check_coverage, check_min_overlap
from app.services.problems import get_problem, list_problems

router = APIRouter(
    prefix="/api",
    tags=["problems"],
)


@router.get(
    "/health",
    summary="Health Check",
    description="Check if the API is running",
    tags=["health"],
)
async def health_check():
    """
    Simple health check endpoint.

    Returns:
        Dict with status information
    """
    return {
        "status": "healthy",
        "service": "fcflow",
        "version": "1.0.0",
    }


@router.get(
    "/problems",
    summary="Built-in Problems",
    description="Names, end times, CFL overrides and refinement bounds of the built-in presets.",
)
async def problems() -> list[dict]:
    return list_problems()


@router.post(
    "/mesh/validate",
    response_model=MeshValidationResponse,
    summary="Validate a Preset Decomposition",
    description="""
    Build the decomposition of a built-in problem (optionally refined to
    `hbar`) and run the minimum-overlap check and, when `coverage_samples`
    is positive, the coverage check.
    """,
)
def validate_mesh(request: MeshValidationRequest) -> MeshValidationResponse:
    """
    Raises:
        HTTPException: 400 for unknown problems, 422 for geometry failures
    """
    try:
        dec = get_problem(request.problem).decomposition(settings, hbar=request.hbar)
        overlap = check_min_overlap(dec)
        coverage = None
        if request.coverage_samples and dec.domain is not None:
            coverage = check_coverage(dec, request.coverage_samples)
    except SolverError as e:
        raise http_error(e)
    logger.info(f"Validated '{request.problem}': overlap passed={overlap.passed}")
    return MeshValidationResponse(
        problem=request.problem, summary=dec.summary(), overlap=overlap, coverage=coverage
    )
