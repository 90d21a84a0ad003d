"""
Pydantic models for run configurations and run results.
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, model_validator

from app.core.exceptions import ConfigurationError

RUN_SCHEMA_VERSION = 1


class RunConfig(BaseModel):
    """Everything needed to reproduce one run; unset fields fall back to the settings."""

    schema_version: Literal[1] = RUN_SCHEMA_VERSION
    problem: str = Field(..., description="Built-in problem name", examples=["sod", "riemann4"])
    mesh: Optional[str] = Field(
        default=None, description="Mesh file replacing the preset geometry (same side tags)"
    )
    problem_options: Dict[str, Any] = Field(
        default_factory=dict, description="Preset options such as r, s, rows, cols or mach"
    )
    t_end: Optional[float] = Field(default=None, ge=0, description="End time; preset value if unset")
    cfl: Optional[float] = Field(default=None, gt=0, le=1)
    hbar: Optional[float] = Field(default=None, gt=0, description="Refinement bound")
    scale: float = Field(
        default=1.0, gt=0, description="Desk scale factor multiplying the preset refinement bound"
    )
    max_steps: Optional[int] = Field(default=None, ge=0)
    output_every: int = Field(
        default=0, ge=0, description="Write fields every this many steps; 0 writes the final state only"
    )
    write_fields: bool = True
    write_schlieren: bool = True
    raster_width: int = Field(default=400, ge=8, le=8000)
    workers: Optional[int] = Field(default=None, ge=1)
    transport: Optional[Literal["thread", "process", "mpi"]] = None
    classifier_variant: Optional[Literal["fallback", "ann"]] = None
    classifier_weights: Optional[str] = None
    filter_order: Optional[int] = Field(default=None, ge=2)
    filter_alpha: Optional[float] = Field(default=None, gt=0)
    smear_order: Optional[int] = Field(default=None, ge=2)
    output_dir: Optional[str] = None
    run_name: Optional[str] = None

    class Config:
        json_schema_extra = {
            "example": {
                "schema_version": 1,
                "problem": "sod",
                "t_end": 0.2,
                "workers": 4,
                "transport": "thread",
                "output_every": 100,
            }
        }

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        for name in ("filter_order", "smear_order"):
            value = getattr(self, name)
            if value is not None and value % 2:
                raise ValueError(f"{name} must be even")
        return self

    def settings_overrides(self) -> Dict[str, Any]:
        """Settings fields replaced by this config."""
        mapping = {
            "workers": "workers",
            "transport": "transport",
            "classifier_variant": "classifier_variant",
            "classifier_weights": "classifier_weights",
            "filter_order": "fc_filter_order",
            "filter_alpha": "fc_filter_alpha",
            "smear_order": "fc_smear_order",
            "output_dir": "output_dir",
        }
        return {
            target: getattr(self, source)
            for source, target in mapping.items()
            if getattr(self, source) is not None
        }

    @classmethod
    def from_file(cls, path: Path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigurationError("run config not found", path=str(path))
        except json.JSONDecodeError as e:
            raise ConfigurationError("run config is not valid JSON", path=str(path), reason=str(e))
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(
                "invalid run config", path=str(path), errors=e.errors(include_url=False)
            )


class RunResult(BaseModel):
    """Output manifest of a finished run."""

    schema_version: int = RUN_SCHEMA_VERSION
    run_dir: str
    problem: str
    steps: int
    final_time: float
    decomposition: Dict[str, Any]
    wall_times: Dict[str, float]
    files: List[str] = Field(default_factory=list)
    energy_file: Optional[str] = None
    config: Dict[str, Any] = Field(default_factory=dict)
