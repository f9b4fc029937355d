"""
Insertion Metrics

Displacement measures recorded during a catheter insertion:
- Penetration depth of the tip
- Average displacement of the particles in a slab at the measurement depth
- Centre-of-mass displacement of the whole scene and of each structure
- Mismatch between a simulated and a reference displacement curve
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from exceptions import MeasurementError

logger = logging.getLogger(__name__)


# =============================================================================
# PER-FRAME MEASURES
# =============================================================================

def penetration_depth(tip_init: Sequence[float], tip_now: Sequence[float]) -> float:
    """Distance travelled by the catheter tip."""
    return float(np.linalg.norm(np.asarray(tip_now, dtype=float) - np.asarray(tip_init, dtype=float)))


@dataclass
class Slab:
    """Particles whose rest position lies within half_width of `center` along `axis`."""
    origin: np.ndarray
    axis: np.ndarray
    center: float
    half_width: float

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        self.axis = np.asarray(self.axis, dtype=float).reshape(3)
        self.axis = self.axis / np.linalg.norm(self.axis)
        if self.half_width <= 0:
            raise MeasurementError(f"slab half_width must be > 0, got {self.half_width}")

    def select(self, rest: np.ndarray) -> np.ndarray:
        along = (np.asarray(rest, dtype=float) - self.origin) @ self.axis
        return np.nonzero(np.abs(along - self.center) <= self.half_width * (1.0 + 1e-9))[0]


def _positions(system) -> np.ndarray:
    return np.asarray(getattr(system, "positions", system), dtype=float)


def slab_average_displacement(system, rest: np.ndarray, slab: Slab) -> float:
    """
    Mean displacement magnitude of the particles selected by the slab.

    Args:
        system: ParticleSystem or (N, 3) current positions
        rest: (N, 3) rest positions
        slab: selection by rest position

    Raises:
        MeasurementError: the slab selects no particle
    """
    rest = np.asarray(rest, dtype=float)
    idx = slab.select(rest)
    if len(idx) == 0:
        raise MeasurementError(
            f"slab at depth {slab.center:g} m (half width {slab.half_width:g} m) selects no particles"
        )
    current = _positions(system)
    return float(np.linalg.norm(current[idx] - rest[idx], axis=1).mean())


def com_displacement(current: np.ndarray, rest: np.ndarray, subset: Optional[Sequence[int]] = None) -> float:
    """Distance between the rest and current centroids of a particle subset (uniform masses)."""
    current = _positions(current)
    rest = np.asarray(rest, dtype=float)
    if subset is not None:
        subset = np.asarray(subset, dtype=np.int64)
        if len(subset) == 0:
            raise MeasurementError("centre-of-mass subset is empty")
        current, rest = current[subset], rest[subset]
    if len(rest) == 0:
        raise MeasurementError("centre-of-mass subset is empty")
    return float(np.linalg.norm(current.mean(axis=0) - rest.mean(axis=0)))


# =============================================================================
# RECORDS
# =============================================================================

RECORD_COLUMNS = ["time", "depth", "slab_avg_disp", "com_disp"]


@dataclass
class InsertionFrame:
    """Metrics sampled at one point of an insertion."""
    time: float
    depth: float
    slab_avg_disp: float
    com_disp: float
    per_structure_disp: Dict[str, float] = field(default_factory=dict)


@dataclass
class InsertionRecord:
    """Frames of one insertion; optional run diagnostics ride along."""
    frames: List[InsertionFrame]
    structure_names: List[str]
    diagnostics: Optional[object] = None

    def __len__(self) -> int:
        return len(self.frames)

    def validate(self) -> None:
        times = np.array([f.time for f in self.frames])
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise MeasurementError("record times must be strictly increasing")

    @property
    def last(self) -> InsertionFrame:
        return self.frames[-1]

    def column(self, name: str) -> np.ndarray:
        if name in RECORD_COLUMNS:
            return np.array([getattr(f, name) for f in self.frames], dtype=float)
        return np.array([f.per_structure_disp[name] for f in self.frames], dtype=float)

    def curve(self) -> "DisplacementCurve":
        """Slab-average displacement against depth."""
        return DisplacementCurve(self.column("depth"), self.column("slab_avg_disp"))

    def to_dataframe(self) -> pd.DataFrame:
        data = {name: self.column(name) for name in RECORD_COLUMNS}
        for name in self.structure_names:
            data[name] = self.column(name)
        return pd.DataFrame(data, columns=RECORD_COLUMNS + list(self.structure_names))

    @classmethod
    def from_dataframe(cls, df: pd.DataFrame) -> "InsertionRecord":
        missing = [c for c in RECORD_COLUMNS if c not in df.columns]
        if missing:
            raise MeasurementError(f"record is missing columns {missing}")
        names = [c for c in df.columns if c not in RECORD_COLUMNS]
        frames = [
            InsertionFrame(
                time=float(row["time"]),
                depth=float(row["depth"]),
                slab_avg_disp=float(row["slab_avg_disp"]),
                com_disp=float(row["com_disp"]),
                per_structure_disp={n: float(row[n]) for n in names},
            )
            for _, row in df.iterrows()
        ]
        return cls(frames=frames, structure_names=names)


def average_records(records: Sequence[InsertionRecord]) -> InsertionRecord:
    """
    Frame-wise mean of k insertion records.

    Records are aligned by frame index; longer records are truncated to the shortest.
    """
    if not records:
        raise MeasurementError("no records to average")
    if len(records) == 1:
        return records[0]
    n = min(len(r) for r in records)
    names = list(records[0].structure_names)
    if n < max(len(r) for r in records):
        logger.warning(f"averaging records of unequal length; truncating to {n} frames")

    frames = []
    for i in range(n):
        group = [r.frames[i] for r in records]
        frames.append(InsertionFrame(
            time=float(np.mean([f.time for f in group])),
            depth=float(np.mean([f.depth for f in group])),
            slab_avg_disp=float(np.mean([f.slab_avg_disp for f in group])),
            com_disp=float(np.mean([f.com_disp for f in group])),
            per_structure_disp={s: float(np.mean([f.per_structure_disp[s] for f in group])) for s in names},
        ))
    return InsertionRecord(frames=frames, structure_names=names, diagnostics=records[0].diagnostics)


def structure_heatmap(records: Sequence[InsertionRecord]) -> pd.DataFrame:
    """Mean per-structure CoM displacement, one row per depth and one column per structure."""
    avg = average_records(records)
    df = pd.DataFrame({name: avg.column(name) for name in avg.structure_names})
    df.index = pd.Index(avg.column("depth"), name="depth")
    return df


def mean_structure_displacement(records: Sequence[InsertionRecord]) -> float:
    """Mean CoM displacement over frames, structures and experiments."""
    values = [
        v
        for r in records
        for f in r.frames
        for v in f.per_structure_disp.values()
    ]
    if not values:
        raise MeasurementError("records carry no per-structure displacements")
    return float(np.mean(values))


# =============================================================================
# CURVE COMPARISON
# =============================================================================

@dataclass
class DisplacementCurve:
    """Displacement sampled at increasing depths (meters)."""
    depth: np.ndarray
    displacement: np.ndarray

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=float).reshape(-1)
        self.displacement = np.asarray(self.displacement, dtype=float).reshape(-1)
        if len(self.depth) != len(self.displacement):
            raise MeasurementError("curve depth and displacement lengths differ")
        if len(self.depth) < 2:
            raise MeasurementError(f"a curve needs at least 2 points, got {len(self.depth)}")
        if np.any(np.diff(self.depth) <= 0):
            raise MeasurementError("curve depths must be strictly increasing")

    @classmethod
    def from_points(cls, depth: Sequence[float], displacement: Sequence[float]) -> "DisplacementCurve":
        """Build from unsorted samples, averaging duplicate depths."""
        df = pd.DataFrame({"depth": depth, "displacement": displacement})
        df = df.groupby("depth", as_index=False)["displacement"].mean().sort_values("depth")
        return cls(df["depth"].to_numpy(), df["displacement"].to_numpy())


@dataclass
class MismatchResult:
    mse_pct: float
    rmse: float
    per_depth: pd.DataFrame     # depth, sim, ref, rel_error
    overlap: tuple
    normalizer: float

    @property
    def overlap_width(self) -> float:
        return self.overlap[1] - self.overlap[0]

    def to_dict(self) -> Dict:
        return {
            'mse_pct': self.mse_pct,
            'rmse': self.rmse,
            'overlap_min': self.overlap[0],
            'overlap_max': self.overlap[1],
            'overlap_width': self.overlap_width,
            'normalizer': self.normalizer,
        }


def mismatch_score(sim_curve: DisplacementCurve, ref_curve: DisplacementCurve) -> MismatchResult:
    """
    Normalized RMSE (percent) between two displacement curves over their common depth range.

    Both curves are linearly interpolated onto the union of their depths inside
    the overlap. Relative errors are |sim - ref| / max|ref|. The result depends
    on which curve is the reference.

    Raises:
        MeasurementError: the depth ranges do not overlap
    """
    lo = max(sim_curve.depth[0], ref_curve.depth[0])
    hi = min(sim_curve.depth[-1], ref_curve.depth[-1])
    if hi <= lo:
        raise MeasurementError(
            f"curves do not overlap: sim [{sim_curve.depth[0]:g}, {sim_curve.depth[-1]:g}] m, "
            f"ref [{ref_curve.depth[0]:g}, {ref_curve.depth[-1]:g}] m"
        )

    grid = np.concatenate([sim_curve.depth, ref_curve.depth, [lo, hi]])
    grid = np.unique(grid[(grid >= lo) & (grid <= hi)])
    sim = np.interp(grid, sim_curve.depth, sim_curve.displacement)
    ref = np.interp(grid, ref_curve.depth, ref_curve.displacement)

    normalizer = float(np.abs(ref).max())
    if normalizer == 0.0:
        normalizer = 1.0
    rel = np.abs(sim - ref) / normalizer
    per_depth = pd.DataFrame({"depth": grid, "sim": sim, "ref": ref, "rel_error": rel})

    return MismatchResult(
        mse_pct=float(100.0 * np.sqrt(np.mean(rel ** 2))),
        rmse=float(np.sqrt(np.mean((sim - ref) ** 2))),
        per_depth=per_depth,
        overlap=(float(lo), float(hi)),
        normalizer=normalizer,
    )


# =============================================================================
# RUN SUMMARY
# =============================================================================

class RunMetrics:
    """Summary of one insertion run: final metrics and solver timing."""

    def __init__(
        self,
        record: InsertionRecord,
        step_times: Sequence[float],
        max_speed: float,
        catheter_speed: float,
        min_clearance: float,
        on_axis_contacts: int = 0,
    ):
        self.record = record
        self.step_times = np.asarray(step_times, dtype=float)
        self.max_speed = max_speed
        self.catheter_speed = catheter_speed
        self.min_clearance = min_clearance
        self.on_axis_contacts = on_axis_contacts

        self._calculate_all()

    def _calculate_all(self):
        last = self.record.last
        self.final_depth = last.depth
        self.final_slab_avg_disp = last.slab_avg_disp
        self.final_com_disp = last.com_disp
        self.final_structure_disp = dict(last.per_structure_disp)

        if len(self.step_times):
            ms = self.step_times * 1000.0
            self.step_mean_ms = float(ms.mean())
            self.step_p95_ms = float(np.percentile(ms, 95))
            self.step_max_ms = float(ms.max())
        else:
            self.step_mean_ms = self.step_p95_ms = self.step_max_ms = 0.0

        self.speed_ratio = self.max_speed / self.catheter_speed if self.catheter_speed > 0 else 0.0

    def to_dict(self) -> Dict:
        """Convert metrics to dictionary."""
        return {
            'frames': len(self.record),
            'steps': int(len(self.step_times)),
            'final_depth': self.final_depth,
            'final_slab_avg_disp': self.final_slab_avg_disp,
            'final_com_disp': self.final_com_disp,
            'final_structure_disp': self.final_structure_disp,
            'step_latency_ms': {
                'mean': round(self.step_mean_ms, 4),
                'p95': round(self.step_p95_ms, 4),
                'max': round(self.step_max_ms, 4),
            },
            'max_particle_speed': self.max_speed,
            'speed_ratio': self.speed_ratio,
            'min_clearance': self.min_clearance if np.isfinite(self.min_clearance) else None,
            'on_axis_contacts': self.on_axis_contacts,
        }
