"""
Pydantic models for mesh validation reports and mesh requests.
"""
from typing import List, Optional

from pydantic import BaseModel, Field


class OverlapIssue(BaseModel):
    """One failed minimum-overlap check."""

    patch: int = Field(..., description="Index of the patch whose side failed")
    side: str = Field(..., description="Parameter side name, or 'corner' for the S-C1 rule")
    rule: str = Field(..., description="'layer' or 's_c1_corner'")
    count: int = Field(..., description="Number of offending points")
    points: List[List[float]] = Field(
        default_factory=list, description="Up to 20 offending physical points"
    )
    detail: str = ""


class OverlapReport(BaseModel):
    """Result of the minimum-overlap condition check."""

    passed: bool
    checked_sides: int = 0
    checked_corners: int = 0
    issues: List[OverlapIssue] = Field(default_factory=list)

    class Config:
        json_schema_extra = {
            "example": {
                "passed": False,
                "checked_sides": 2,
                "checked_corners": 0,
                "issues": [
                    {
                        "patch": 0,
                        "side": "q1_max",
                        "rule": "layer",
                        "count": 1919,
                        "points": [[0.82, 0.0]],
                        "detail": "layer points outside every other patch",
                    }
                ],
            }
        }


class CoverageReport(BaseModel):
    """Statistical check that the patches cover the flow domain."""

    samples: int
    uncovered: int
    grid_points_outside: int = 0
    passed: bool
    points: List[List[float]] = Field(default_factory=list)


class MeshValidationRequest(BaseModel):
    """Request model for mesh validation of a built-in problem."""

    problem: str = Field(..., description="Built-in problem name", examples=["sod", "wedge-m3.5"])
    hbar: Optional[float] = Field(
        default=None, gt=0, description="Refine the preset until its grid size is below hbar"
    )
    coverage_samples: int = Field(default=4000, ge=0, le=200000)


class MeshValidationResponse(BaseModel):
    problem: str
    summary: dict
    overlap: OverlapReport
    coverage: Optional[CoverageReport] = None
