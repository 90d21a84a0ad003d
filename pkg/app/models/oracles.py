"""
Pydantic models for the oracle endpoints.
"""
from typing import List, Literal, Optional

from pydantic import BaseModel, Field


class RiemannRequest(BaseModel):
    """Exact 1D Riemann problem sampled on a uniform grid."""

    left: List[float] = Field(..., min_length=3, max_length=3, description="(rho, u, p) left of x0")
    right: List[float] = Field(..., min_length=3, max_length=3, description="(rho, u, p) right of x0")
    t: float = Field(..., ge=0)
    x0: float = 0.5
    x_min: float = 0.0
    x_max: float = 1.0
    points: int = Field(default=401, ge=2, le=100000)
    gamma: float = Field(default=1.4, gt=1.0)

    class Config:
        json_schema_extra = {
            "example": {"left": [1.0, 0.0, 1.0], "right": [0.125, 0.0, 0.1], "t": 0.2}
        }


class RiemannResponse(BaseModel):
    p_star: float
    u_star: float
    rho_star_left: float
    rho_star_right: float
    wave_positions: List[float]
    x: List[float]
    rho: List[float]
    u: List[float]
    p: List[float]


class ObliqueRequest(BaseModel):
    mach: float = Field(..., gt=1.0, examples=[3.5])
    wedge_angle: float = Field(..., ge=0.0, lt=180.0, description="Full wedge angle in degrees")
    gamma: float = Field(default=1.4, gt=1.0)


class ObliqueResponse(BaseModel):
    mach: float
    wedge_angle: float
    weak: float = Field(..., description="Weak-branch shock angle in degrees")
    strong: float
    max_deflection: float
    mach_angle: float


class ShockStateRequest(BaseModel):
    mach: float = Field(..., gt=1.0, examples=[10.0])
    x_s: float = 0.0
    convention: Optional[Literal["tabulated", "rankine_hugoniot"]] = None
    gamma: float = Field(default=1.4, gt=1.0)


class ShockStateResponse(BaseModel):
    left: List[float]
    right: List[float]
    convention: str
    reference: List[float] = Field(..., description="Post-shock state from the jump-condition solver")
    residuals: List[float] = Field(..., description="Relative mass, momentum and energy flux jumps")
