"""
Structure parameter tables and calibration search spaces.

Table CSV header:
    name,particle_spacing,cluster_spacing_radius,cluster_stiffness,link_radius,link_stiffness

`cluster_spacing_radius` sets both cluster spacing and cluster radius.
Lines starting with '#' are comments.
"""
import itertools
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

import config
from exceptions import ConfigError
from simulation.shape_match import ClusterParams

logger = logging.getLogger(__name__)

TABLE_COLUMNS = [
    "name",
    "particle_spacing",
    "cluster_spacing_radius",
    "cluster_stiffness",
    "link_radius",
    "link_stiffness",
]

PARAM_NAMES = ["cluster_spacing", "cluster_radius", "cluster_stiffness", "link_radius", "link_stiffness"]


@dataclass
class StructureParams:
    """Sampling and constraint parameters of one structure."""
    name: str
    particle_spacing: float
    cluster: ClusterParams

    def __post_init__(self):
        if not np.isfinite(self.particle_spacing) or self.particle_spacing <= 0:
            raise ConfigError(f"{self.name}: particle_spacing must be > 0, got {self.particle_spacing}")
        try:
            self.cluster.validate()
        except ConfigError as e:
            raise ConfigError(f"{self.name}: {e}") from e

    def with_cluster(self, cluster: ClusterParams) -> "StructureParams":
        return replace(self, cluster=cluster)

    def to_row(self) -> Dict:
        c = self.cluster
        if not np.isclose(c.cluster_spacing, c.cluster_radius, rtol=0, atol=1e-15):
            logger.warning(
                f"{self.name}: cluster spacing {c.cluster_spacing:g} and radius {c.cluster_radius:g} differ; "
                f"table column keeps the radius"
            )
        return {
            "name": self.name,
            "particle_spacing": self.particle_spacing,
            "cluster_spacing_radius": c.cluster_radius,
            "cluster_stiffness": c.cluster_stiffness,
            "link_radius": c.link_radius,
            "link_stiffness": c.link_stiffness,
        }


class StructureParamTable:
    """Structure name -> StructureParams, in file order."""

    def __init__(self, entries: Sequence[StructureParams], source: Optional[Path] = None):
        self.entries: Dict[str, StructureParams] = {}
        for e in entries:
            if e.name in self.entries:
                raise ConfigError(f"duplicate structure '{e.name}' in parameter table")
            self.entries[e.name] = e
        self.source = source

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __iter__(self) -> Iterator[StructureParams]:
        return iter(self.entries.values())

    @property
    def names(self) -> List[str]:
        return list(self.entries)

    def get(self, name: str) -> StructureParams:
        if name not in self.entries:
            where = f" ({self.source})" if self.source else ""
            raise ConfigError(f"structure '{name}' has no entry in the parameter table{where}")
        return self.entries[name]

    def with_params(self, name: str, cluster: ClusterParams) -> "StructureParamTable":
        """Copy with one structure's cluster parameters replaced."""
        updated = [e.with_cluster(cluster) if e.name == name else e for e in self]
        if name not in self.entries:
            raise ConfigError(f"structure '{name}' has no entry in the parameter table")
        return StructureParamTable(updated, self.source)

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([e.to_row() for e in self], columns=TABLE_COLUMNS)


def load_structure_params(path: Union[str, Path]) -> StructureParamTable:
    """
    Read a structure parameter table.

    All five numeric values are required on every row.

    Raises:
        ConfigError: missing/empty file, missing columns or values, out-of-range values
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"parameter table not found: {path}")
    try:
        df = pd.read_csv(path, comment="#", skipinitialspace=True, float_precision="round_trip")
    except pd.errors.EmptyDataError:
        raise ConfigError(f"parameter table is empty: {path}")
    df.columns = [str(c).strip() for c in df.columns]

    missing = [c for c in TABLE_COLUMNS if c not in df.columns]
    if missing:
        raise ConfigError(f"{path}: missing columns {missing}")
    if df.empty:
        raise ConfigError(f"parameter table has no rows: {path}")

    numeric = TABLE_COLUMNS[1:]
    values = df[numeric].apply(pd.to_numeric, errors="coerce")
    bad = values.isna().any(axis=1)
    if bad.any():
        row = int(np.nonzero(bad.to_numpy())[0][0])
        raise ConfigError(f"{path}: row {row + 1} ({df['name'].iloc[row]}) is missing or has non-numeric values")

    entries = []
    for name, (_, row) in zip(df["name"].astype(str).str.strip(), values.iterrows()):
        cluster = ClusterParams(
            cluster_spacing=float(row["cluster_spacing_radius"]),
            cluster_radius=float(row["cluster_spacing_radius"]),
            cluster_stiffness=float(row["cluster_stiffness"]),
            link_radius=float(row["link_radius"]),
            link_stiffness=float(row["link_stiffness"]),
        )
        entries.append(StructureParams(name=name, particle_spacing=float(row["particle_spacing"]), cluster=cluster))

    logger.info(f"Loaded {len(entries)} structure parameter rows from {path.name}")
    return StructureParamTable(entries, source=path)


def save_structure_params(table: StructureParamTable, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_dataframe().to_csv(path, index=False, float_format="%.17g")
    return path


# =============================================================================
# SEARCH SPACE
# =============================================================================

@dataclass
class ParamSpace:
    """Box of cluster/link parameters; radius >= spacing / 2 holds on every point."""
    cluster_spacing: Tuple[float, float] = config.CLUSTER_SPACING_RANGE
    cluster_radius: Tuple[float, float] = config.CLUSTER_RADIUS_RANGE
    cluster_stiffness: Tuple[float, float] = config.CLUSTER_STIFFNESS_RANGE
    link_radius: Tuple[float, float] = (0.005, 0.005)
    link_stiffness: Tuple[float, float] = (0.001, 0.001)

    def __post_init__(self):
        for name in PARAM_NAMES:
            lo, hi = (float(v) for v in getattr(self, name))
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise ConfigError(f"{name} range must be non-empty, got ({lo}, {hi})")
            setattr(self, name, (lo, hi))
        for name in ("cluster_spacing", "cluster_radius", "link_radius"):
            if getattr(self, name)[0] <= 0:
                raise ConfigError(f"{name} range must be positive")
        for name in ("cluster_stiffness", "link_stiffness"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi > 1:
                raise ConfigError(f"{name} range must lie within [0, 1]")
        if self.cluster_radius[1] < self.cluster_spacing[0] / 2.0:
            raise ConfigError("no point of the space satisfies cluster_radius >= cluster_spacing / 2")

    def bounds(self, name: str) -> Tuple[float, float]:
        return getattr(self, name)

    @property
    def free_dimensions(self) -> List[str]:
        return [n for n in PARAM_NAMES if self.bounds(n)[1] > self.bounds(n)[0]]

    def clamp(self, values: Dict[str, float]) -> ClusterParams:
        """Clip into the box and raise the radius to half the spacing where needed."""
        v = {n: float(np.clip(values[n], *self.bounds(n))) for n in PARAM_NAMES}
        v["cluster_radius"] = max(v["cluster_radius"], v["cluster_spacing"] / 2.0)
        return ClusterParams(**v)

    def contains(self, params: ClusterParams) -> bool:
        eps = 1e-12
        inside = all(
            self.bounds(n)[0] - eps <= getattr(params, n) <= self.bounds(n)[1] + eps for n in PARAM_NAMES
        )
        return inside and params.cluster_radius >= params.cluster_spacing / 2.0 - eps

    def grid(self, resolution: int = config.DEFAULT_GRID_RESOLUTION) -> List[ClusterParams]:
        """Full-factorial grid, coupling-repaired and deduplicated, in lexicographic order."""
        if resolution < 1:
            raise ConfigError(f"grid resolution must be >= 1, got {resolution}")
        axes = []
        for n in PARAM_NAMES:
            lo, hi = self.bounds(n)
            axes.append([lo] if hi == lo else list(np.linspace(lo, hi, resolution)))
        points = []
        seen = set()
        for combo in itertools.product(*axes):
            p = self.clamp(dict(zip(PARAM_NAMES, combo)))
            if p.key() in seen:
                continue
            seen.add(p.key())
            points.append(p)
        return points

    @classmethod
    def around(cls, params: ClusterParams, vary: Sequence[str], **ranges) -> "ParamSpace":
        """Space pinned at `params` except for the named dimensions."""
        kwargs = {}
        for n in PARAM_NAMES:
            value = getattr(params, n)
            kwargs[n] = ranges.get(n, (value, value)) if n in vary else (value, value)
        return cls(**kwargs)
