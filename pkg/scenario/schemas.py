"""
Scenario Models - Pydantic schemas for scenario and probe-spec files
"""
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

import config
from config import BoxFace, RegionNorm

Vec3 = Tuple[float, float, float]


# =============================================================================
# GEOMETRY
# =============================================================================

class MeshEntry(BaseModel):
    """One structure: a mesh file or a primitive."""
    model_config = ConfigDict(extra="forbid")

    structure: str = Field(..., min_length=1, description="Row name in the parameter table")
    path: Optional[str] = None
    units_scale: float = Field(1.0, gt=0, description="File units to meters")
    primitive: Optional[Literal["box", "ellipsoid"]] = None
    dimensions: Optional[Vec3] = None
    radii: Optional[Vec3] = None
    center: Vec3 = (0.0, 0.0, 0.0)

    @model_validator(mode="after")
    def one_source(self):
        if (self.path is None) == (self.primitive is None):
            raise ValueError(f"mesh '{self.structure}' needs exactly one of 'path' or 'primitive'")
        if self.primitive == "box" and self.dimensions is None:
            raise ValueError(f"box mesh '{self.structure}' needs 'dimensions'")
        if self.primitive == "ellipsoid" and self.radii is None:
            raise ValueError(f"ellipsoid mesh '{self.structure}' needs 'radii'")
        return self


# =============================================================================
# CATHETER / PROTOCOL / SOLVER
# =============================================================================

class RigSection(BaseModel):
    """Catheter rig."""
    model_config = ConfigDict(extra="forbid")

    radius: float = Field(config.CATHETER_RADIUS, gt=0)
    start_tip: Vec3
    direction: Vec3 = (1.0, 0.0, 0.0)
    speed: float = Field(config.CATHETER_SPEED, ge=0)
    shaft_length: float = Field(..., gt=0)
    margin: float = Field(0.0, ge=0, description="Contact skin added to the radius")
    friction: float = Field(0.0, ge=0, description="Axial drag fraction for contacting particles")

    @model_validator(mode="after")
    def nonzero_direction(self):
        if sum(c * c for c in self.direction) == 0:
            raise ValueError("rig.direction must be non-zero")
        return self


class ProtocolSection(BaseModel):
    """Insertion depth and metric sampling."""
    model_config = ConfigDict(extra="forbid")

    depth_max: float = Field(..., ge=0)
    sample_interval: float = Field(config.SAMPLE_INTERVAL, gt=0)
    measurement_depth: float = Field(config.MEASUREMENT_DEPTH, ge=0)
    slab_half_width: Optional[float] = Field(None, gt=0)
    repeats: int = Field(1, ge=1)


class SimSection(BaseModel):
    """Solver settings."""
    model_config = ConfigDict(extra="forbid")

    dt: float = Field(config.DEFAULT_DT, gt=0)
    solver_iterations: int = Field(config.DEFAULT_SOLVER_ITERATIONS, ge=1)
    substeps: int = Field(config.DEFAULT_SUBSTEPS, ge=1)
    gravity: Vec3 = config.DEFAULT_GRAVITY
    damping: float = Field(config.DEFAULT_DAMPING, ge=0, le=1)


class NoiseSection(BaseModel):
    """Uniform jitter of initial particle positions."""
    model_config = ConfigDict(extra="forbid")

    enabled: bool = False
    amplitude: float = Field(0.1, ge=0, le=0.5, description="Fraction of particle spacing")


class CalibrationSection(BaseModel):
    """Which structure to fit and over which ranges."""
    model_config = ConfigDict(extra="forbid")

    structure: Optional[str] = None
    grid_resolution: int = Field(config.DEFAULT_GRID_RESOLUTION, ge=1)
    cluster_spacing: Tuple[float, float] = config.CLUSTER_SPACING_RANGE
    cluster_radius: Tuple[float, float] = config.CLUSTER_RADIUS_RANGE
    cluster_stiffness: Tuple[float, float] = config.CLUSTER_STIFFNESS_RANGE
    link_radius: Optional[Tuple[float, float]] = None
    link_stiffness: Optional[Tuple[float, float]] = None


# =============================================================================
# SCENARIO
# =============================================================================

class Scenario(BaseModel):
    """A complete experiment description."""
    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1)
    description: Optional[str] = None
    meshes: List[MeshEntry] = Field(..., min_length=1)
    param_table: str
    rig: RigSection
    protocol: ProtocolSection
    sim: SimSection = SimSection()
    pinned_faces: List[BoxFace] = []
    region_norm: RegionNorm = RegionNorm.CHEBYSHEV
    seed: int = 0
    noise: NoiseSection = NoiseSection()
    calibration: CalibrationSection = CalibrationSection()

    # Directory of the scenario file; relative paths resolve against it
    base_dir: Path = Field(default=Path("."), exclude=True)

    @model_validator(mode="after")
    def unique_structures(self):
        names = [m.structure for m in self.meshes]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ValueError(f"structures listed more than once: {dupes}")
        if self.calibration.structure is not None and self.calibration.structure not in names:
            raise ValueError(f"calibration.structure '{self.calibration.structure}' is not one of the meshes {names}")
        return self

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else (self.base_dir / p)

    @property
    def structure_names(self) -> List[str]:
        return [m.structure for m in self.meshes]

    @property
    def calibration_structure(self) -> str:
        return self.calibration.structure or self.meshes[0].structure


# =============================================================================
# PROBES
# =============================================================================

class ProbeSpec(BaseModel):
    """Hole-perimeter probe layout; axis defaults to the catheter's."""
    model_config = ConfigDict(extra="forbid")

    origin: Optional[Vec3] = None
    direction: Optional[Vec3] = None
    hole_radius: Optional[float] = Field(None, gt=0)
    depth_range: Tuple[float, float]
    max_distance_factor: float = Field(config.PROBE_MAX_DISTANCE_FACTOR, gt=0)

    @model_validator(mode="after")
    def increasing_range(self):
        if not self.depth_range[1] > self.depth_range[0]:
            raise ValueError(f"depth_range must be increasing, got {list(self.depth_range)}")
        return self
