"""
Oracle API routes.
Closed-form reference solutions used to validate solver output.
"""
import numpy as np
from fastapi import APIRouter

from app.core.config import settings
from app.core.exceptions import SolverError
from app.core.logger import logger
from app.models.oracles import (
    ObliqueRequest,
    ObliqueResponse,
    RiemannRequest,
    RiemannResponse,
    ShockStateRequest,
    ShockStateResponse,
)
from app.routes.errors import http_error
from app.services.oracles import exact_riemann_1d, oblique_shock
from app.services.problems import shock_state_check

router = APIRouter(
    prefix="/api/oracles",
    tags=["oracles"],
)


@router.post(
    "/riemann",
    response_model=RiemannResponse,
    summary="Exact 1D Riemann Solution",
    description="""
    Sample the exact solution of a one-dimensional Riemann problem for an
    ideal gas at time `t` on `points` uniformly spaced abscissae.

    Returns the star-region pressure and velocity, both star densities and the
    positions of every wave (shocks, contact, rarefaction head and tail).
    """,
)
async def riemann(request: RiemannRequest) -> RiemannResponse:
    """
    Exact Riemann profile.

    Raises:
        HTTPException: 400 for invalid states or a vacuum-generating pair
    """
    try:
        x = np.linspace(request.x_min, request.x_max, request.points)
        solution = exact_riemann_1d(
            request.left, request.right, request.t, x, x0=request.x0, gamma=request.gamma
        )
    except SolverError as e:
        raise http_error(e)
    logger.info(f"Riemann oracle: p*={solution.p_star:.6g}, u*={solution.u_star:.6g}")
    return RiemannResponse(
        p_star=solution.p_star,
        u_star=solution.u_star,
        rho_star_left=solution.rho_star_left,
        rho_star_right=solution.rho_star_right,
        wave_positions=solution.wave_positions,
        x=solution.x.tolist(),
        rho=solution.rho.tolist(),
        u=solution.u.tolist(),
        p=solution.p.tolist(),
    )


@router.post(
    "/oblique",
    response_model=ObliqueResponse,
    summary="Oblique Shock Angle",
    description="Weak and strong shock angles for supersonic flow over a symmetric wedge.",
)
async def oblique(request: ObliqueRequest) -> ObliqueResponse:
    try:
        shock = oblique_shock(request.mach, request.wedge_angle, request.gamma)
    except SolverError as e:
        raise http_error(e)
    return ObliqueResponse(
        mach=shock.mach,
        wedge_angle=shock.wedge_angle,
        weak=shock.weak,
        strong=shock.strong,
        max_deflection=shock.max_deflection,
        mach_angle=shock.mach_angle,
    )


@router.post(
    "/shock-state",
    response_model=ShockStateResponse,
    summary="Shock Initial States",
    description="""
    Left and right states of a right-moving shock initial condition, next to
    the post-shock state obtained by solving the jump conditions and the
    relative flux residuals of the initial states.
    """,
)
async def shock_state(request: ShockStateRequest) -> ShockStateResponse:
    convention = request.convention or settings.shock_density_convention
    try:
        report = shock_state_check(request.mach, request.x_s, request.gamma, convention)
    except SolverError as e:
        raise http_error(e)
    return ShockStateResponse(**report)
