"""
Shared fixtures: a coarse Sod channel that keeps solver tests fast.
"""
import pytest

from app.core.config import Settings
from app.services.problems import get_problem


@pytest.fixture
def small_settings(tmp_path) -> Settings:
    """Coarse grids (21-point cells, 4-line overlaps, 3-point fringes)."""
    return Settings(geom_n0=21, geom_n1=13, geom_nv=4, geom_nf=3, output_dir=str(tmp_path / "runs"))


@pytest.fixture
def sod_dec(small_settings):
    """Sod channel split into four overlapping subpatches along x."""
    return get_problem("sod").decomposition(small_settings)


@pytest.fixture
def default_settings(tmp_path) -> Settings:
    """Production grid sizes (83-point cells, 9-line overlaps, 5-point fringes)."""
    return Settings(output_dir=str(tmp_path / "runs"))
