"""
Core configuration module for the fcflow solver.
Loads and validates environment variables.
"""
import math
from typing import Literal

from dotenv import load_dotenv
from pydantic import Field, model_validator
from pydantic_settings import BaseSettings

from app.core.exceptions import ConfigurationError

# Load environment variables from .env file
load_dotenv()


class Settings(BaseSettings):
    """Solver settings loaded from environment variables."""

    # Fourier continuation
    fc_n_cont: int = Field(
        default=25,
        alias="FC_N_CONT",
        description="Number of continuation grid steps appended past the right end of a line",
    )
    fc_filter_alpha: float = Field(
        default=-math.log(1e-10),
        alias="FC_FILTER_ALPHA",
        description="Exponential filter strength alpha; the highest retained mode is damped by exp(-alpha)",
    )
    fc_filter_order: int = Field(
        default=14, alias="FC_FILTER_ORDER", description="Per-step filter order 2p"
    )
    fc_smear_order: int = Field(
        default=4, alias="FC_SMEAR_ORDER", description="Initial-data smearing filter order 2p"
    )
    fc_oversampling: int = Field(
        default=20,
        alias="FC_OVERSAMPLING",
        description="Fine samples per grid step used to fit the blend-to-zero functions",
    )
    fc_fit_modes: int = Field(
        default=0,
        alias="FC_FIT_MODES",
        description="Trigonometric modes in the blend fit; 0 picks n_cont // 2 + 3",
    )
    fc_fit_tolerance: float = Field(
        default=1e-8,
        alias="FC_FIT_TOLERANCE",
        description="Largest admissible residual of the blend fit",
    )

    # Geometry
    geom_nv: int = Field(default=9, alias="GEOM_NV", description="Subpatch overlap parameter n_v")
    geom_n0: int = Field(default=83, alias="GEOM_N0", description="Points per preliminary Q cell")
    geom_n1: int = Field(default=43, alias="GEOM_N1", description="Points per preliminary L cell")
    geom_nf: int = Field(default=5, alias="GEOM_NF", description="Fringe depth n_f")
    newton_tolerance: float = Field(default=1e-10, alias="NEWTON_TOLERANCE")
    newton_max_iterations: int = Field(default=50, alias="NEWTON_MAX_ITERATIONS")

    # Communication
    interp_order: int = Field(
        default=5, alias="INTERP_ORDER", description="Inter-patch interpolation polynomial order"
    )

    # Gas dynamics and time stepping
    gamma: float = Field(default=1.4, alias="GAMMA")
    cfl: float = Field(default=0.5, alias="CFL")
    cfl_c1: float = Field(
        default=0.25, alias="CFL_C1", description="CFL used when C1 corner patches are present"
    )

    # Artificial viscosity
    visc_stencil: int = Field(default=7, alias="VISC_STENCIL")
    visc_weights: tuple[float, float, float, float] = Field(
        default=(1.5, 1.0, 0.25, 0.0),
        alias="VISC_WEIGHTS",
        description="Viscosity multipliers c(tau) for tau = 1..4",
    )
    visc_smoothing: int = Field(
        default=4,
        alias="VISC_SMOOTHING",
        description="Half-width of the cosine kernel that smooths preliminary viscosity",
    )
    visc_flat_tolerance: float = Field(
        default=1e-3,
        alias="VISC_FLAT_TOLERANCE",
        description="Relative stencil range below which a point is classified smooth",
    )
    classifier_variant: Literal["fallback", "ann"] = Field(
        default="fallback", alias="CLASSIFIER_VARIANT"
    )
    classifier_weights: str = Field(
        default="data/classifier.fcw",
        alias="CLASSIFIER_WEIGHTS",
        description="Weight file used by the ann classifier variant",
    )
    fallback_window: int = Field(default=32, alias="FALLBACK_WINDOW")
    fallback_noise_floor: float = Field(
        default=1e-8,
        alias="FALLBACK_NOISE_FLOOR",
        description="Relative magnitude below which FC modes are left out of the decay fit",
    )

    # Workbench
    shock_density_convention: Literal["tabulated", "rankine_hugoniot"] = Field(
        default="tabulated", alias="SHOCK_DENSITY_CONVENTION"
    )
    schlieren_beta: float = Field(default=10.0, alias="SCHLIEREN_BETA")
    output_dir: str = Field(default="runs", alias="OUTPUT_DIR")

    # Runtime
    workers: int = Field(default=1, alias="WORKERS")
    transport: Literal["thread", "process", "mpi"] = Field(default="thread", alias="TRANSPORT")

    # Application Environment
    app_env: Literal["dev", "prod"] = Field(default="dev", alias="APP_ENV")

    # Server Configuration
    port: int = Field(default=8000, alias="PORT")
    host: str = Field(default="0.0.0.0", alias="HOST")

    @model_validator(mode="after")
    def _check_consistency(self) -> "Settings":
        if self.fc_n_cont < 4:
            raise ConfigurationError("FC_N_CONT must be at least 4", n_cont=self.fc_n_cont)
        if self.fc_filter_order % 2 or self.fc_smear_order % 2:
            raise ConfigurationError("filter orders must be even")
        if 2 * self.geom_nv + 1 < 2 * self.geom_nf:
            raise ConfigurationError(
                "subpatch overlap 2*nv+1 must hold two fringe layers",
                nv=self.geom_nv,
                nf=self.geom_nf,
            )
        if self.interp_order < 3:
            raise ConfigurationError("INTERP_ORDER must be at least 3", order=self.interp_order)
        if self.visc_stencil < 3 or self.visc_stencil % 2 == 0:
            raise ConfigurationError("VISC_STENCIL must be an odd integer >= 3")
        return self

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False
        populate_by_name = True  # Allow using field names or aliases


# Singleton instance
settings = Settings()
