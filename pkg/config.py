"""
NeuroPBD Configuration
"""
import os
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict

# =============================================================================
# ENVIRONMENT
# =============================================================================

# Load .env if exists
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass

# =============================================================================
# PATHS
# =============================================================================

BASE_DIR = Path(__file__).parent
SCENARIO_DIR = BASE_DIR / "scenarios"

# =============================================================================
# SOLVER DEFAULTS
# =============================================================================

DEFAULT_DT = 1.0 / 60.0           # seconds, FleX-style real-time frame
DEFAULT_SOLVER_ITERATIONS = 4
DEFAULT_SUBSTEPS = 1
DEFAULT_DAMPING = 0.01            # fraction of velocity removed per substep
DEFAULT_GRAVITY = (0.0, 0.0, 0.0)  # phantom and brain scenes show no settling

# Polar decomposition
POLAR_TOLERANCE = 1e-9
POLAR_MAX_ITERATIONS = 64

# =============================================================================
# EXPERIMENT PROTOCOL (white-matter phantom, all SI units)
# =============================================================================

PHANTOM_DIMENSIONS = (0.05, 0.0175, 0.0175)
CATHETER_RADIUS = 0.00125         # 2.5 mm outer diameter
CATHETER_SPEED = 0.0005           # 0.5 mm/s
MEASUREMENT_DEPTH = 0.0314
SAMPLE_INTERVAL = 0.00034

# Probe sampling on the insertion-hole perimeter
PROBE_SIDES = 4
PROBE_STATIONS = 5
PROBE_MAX_DISTANCE_FACTOR = 2.0   # x particle spacing

# =============================================================================
# CALIBRATION RANGES
# =============================================================================

CLUSTER_SPACING_RANGE = (0.005, 0.035)
CLUSTER_RADIUS_RANGE = (0.0025, 0.035)
CLUSTER_STIFFNESS_RANGE = (0.0, 1.0)
DEFAULT_GRID_RESOLUTION = 3

# =============================================================================
# ENUMS
# =============================================================================

class ExitCode(int, Enum):
    OK = 0
    CONFIG_ERROR = 1
    INSTABILITY = 2


class BoxFace(str, Enum):
    X_MIN = "x_min"
    X_MAX = "x_max"
    Y_MIN = "y_min"
    Y_MAX = "y_max"
    Z_MIN = "z_min"
    Z_MAX = "z_max"


class RegionNorm(str, Enum):
    CHEBYSHEV = "chebyshev"
    EUCLIDEAN = "euclidean"


class ProbePlane(str, Enum):
    XZ = "xz"
    YZ = "yz"


# =============================================================================
# SETTINGS
# =============================================================================

class Settings(BaseSettings):
    """Runtime settings with SIM_* environment variable support."""

    threads: int = os.cpu_count() or 1
    log_level: str = "INFO"
    log_file: Optional[Path] = None

    # Runaway guard for insertion loops
    max_steps: int = 2_000_000

    # Particle speed sentinel, as a multiple of catheter speed
    speed_sentinel_factor: float = 10.0

    model_config = SettingsConfigDict(env_prefix="SIM_", env_file=".env", extra="ignore")


@lru_cache()
def get_settings() -> Settings:
    """Cached settings instance."""
    return Settings()
