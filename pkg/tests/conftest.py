"""
Pytest configuration and shared fixtures.
"""

import shutil
import sys
import tempfile
from pathlib import Path

import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))
sys.path.insert(0, str(project_root / "scripts"))

FIXTURES_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES_DIR


@pytest.fixture
def temp_out_dir():
    """Create temporary output directory for experiment artifacts."""
    temp_dir = tempfile.mkdtemp()
    yield Path(temp_dir)
    shutil.rmtree(temp_dir, ignore_errors=True)


@pytest.fixture
def small_layout():
    """Half-size cavities: same structure, fewer grid cells."""
    from geometry import LayoutConfig

    return LayoutConfig(
        cavity_length=0.5,
        cavity_depth=0.5,
        barrier_width=0.2,
        coupling_depth=0.045,
        central_length=0.2,
        central_depth=0.5,
    )


@pytest.fixture
def desk_grid():
    from wavefield import GridSettings

    return GridSettings(points_per_wavelength=32, nz=12, steps_per_period=256)
