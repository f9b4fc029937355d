"""
Deformation-field probes on the perimeter of the insertion hole.

Twenty probes: four sides around the catheter axis (two in the xz plane, two
in the yz plane) times five equally spaced stations along the axis. Each
probe takes the displacement of the nearest rest-position particle.
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

import config
from config import ProbePlane
from exceptions import MeasurementError
from simulation.catheter import perpendicular_basis

logger = logging.getLogger(__name__)


@dataclass
class ProbePoint:
    plane: ProbePlane
    side: int          # 1..4
    index: int         # 1..5 along the axis
    rest_position: np.ndarray


@dataclass
class ProbePointSet:
    points: List[ProbePoint]

    def __post_init__(self):
        per_side = {}
        for p in self.points:
            per_side[p.side] = per_side.get(p.side, 0) + 1
        if sorted(per_side) != list(range(1, config.PROBE_SIDES + 1)) or any(
            n != config.PROBE_STATIONS for n in per_side.values()
        ):
            raise MeasurementError(
                f"probe set needs {config.PROBE_STATIONS} points on each of {config.PROBE_SIDES} sides, got {per_side}"
            )

    def __len__(self) -> int:
        return len(self.points)

    @property
    def positions(self) -> np.ndarray:
        return np.array([p.rest_position for p in self.points])


def make_probe_points(
    origin: Sequence[float],
    direction: Sequence[float],
    hole_radius: float,
    depth_range: Tuple[float, float],
    stations: int = config.PROBE_STATIONS,
) -> ProbePointSet:
    """Rest-space probe positions around the hole axis."""
    if hole_radius <= 0:
        raise MeasurementError(f"hole_radius must be > 0, got {hole_radius}")
    d0, d1 = float(depth_range[0]), float(depth_range[1])
    if not d1 > d0:
        raise MeasurementError(f"probe depth range must be increasing, got ({d0}, {d1})")

    origin = np.asarray(origin, dtype=float)
    a = np.asarray(direction, dtype=float)
    a = a / np.linalg.norm(a)
    u, v = perpendicular_basis(a)
    sides = [
        (1, ProbePlane.XZ, u),
        (2, ProbePlane.XZ, -u),
        (3, ProbePlane.YZ, v),
        (4, ProbePlane.YZ, -v),
    ]
    points = []
    for side, plane, radial in sides:
        for k, s in enumerate(np.linspace(d0, d1, stations), start=1):
            points.append(ProbePoint(plane, side, k, origin + s * a + hole_radius * radial))
    return ProbePointSet(points)


@dataclass
class ProbeSample:
    probes: ProbePointSet
    particles: np.ndarray        # nearest particle per probe
    distances: np.ndarray        # probe to nearest particle (rest space)
    displacements: np.ndarray    # (20, 3)

    @property
    def magnitudes(self) -> np.ndarray:
        return np.linalg.norm(self.displacements, axis=1)

    @property
    def mean_displacement(self) -> float:
        return float(self.magnitudes.mean())

    def to_dataframe(self) -> pd.DataFrame:
        pos = self.probes.positions
        return pd.DataFrame({
            "plane": [p.plane.value for p in self.probes.points],
            "side": [p.side for p in self.probes.points],
            "index": [p.index for p in self.probes.points],
            "x": pos[:, 0], "y": pos[:, 1], "z": pos[:, 2],
            "particle": self.particles,
            "disp": self.magnitudes,
        })


def sample_hole_perimeter(
    origin: Sequence[float],
    direction: Sequence[float],
    hole_radius: float,
    depth_range: Tuple[float, float],
    rest: np.ndarray,
    current: np.ndarray,
    particle_spacing: float,
) -> ProbeSample:
    """
    Displacement at the 20 hole-perimeter probes.

    Args:
        origin, direction: insertion axis (depths are measured from origin)
        hole_radius: probe distance from the axis
        depth_range: first and last station depth
        rest, current: (N, 3) particle positions
        particle_spacing: nearest particle must lie within 2x this distance

    Raises:
        MeasurementError: a probe has no particle close enough
    """
    probes = make_probe_points(origin, direction, hole_radius, depth_range)
    rest = np.asarray(rest, dtype=float)
    current = np.asarray(getattr(current, "positions", current), dtype=float)
    dist, idx = cKDTree(rest).query(probes.positions)
    limit = config.PROBE_MAX_DISTANCE_FACTOR * particle_spacing
    far = np.nonzero(dist > limit)[0]
    if len(far):
        p = probes.points[int(far[0])]
        raise MeasurementError(
            f"probe side {p.side} index {p.index} is {dist[far[0]]:.6g} m from the nearest particle "
            f"(limit {limit:.6g} m); the field is too sparse at the hole"
        )
    return ProbeSample(probes, idx, dist, current[idx] - rest[idx])


@dataclass
class ProbeComparison:
    sim: np.ndarray          # simulated magnitudes
    ref: np.ndarray          # reference magnitudes
    rel_error: np.ndarray    # |sim - ref| / |sim|
    mismatch_pct: float

    def to_dataframe(self, sample: ProbeSample) -> pd.DataFrame:
        df = sample.to_dataframe().drop(columns=["disp", "particle"])
        df["sim_disp"] = self.sim
        df["ref_disp"] = self.ref
        df["rel_error"] = self.rel_error
        return df


def compare_probe_fields(
    sample: ProbeSample,
    field_points: np.ndarray,
    field_displacements: np.ndarray,
    max_distance: float,
) -> ProbeComparison:
    """
    Compare probe displacement magnitudes with a reference field.

    The reference value at a probe is that of the nearest field point. Errors
    are relative to the simulated magnitude; a zero simulated magnitude falls
    back to the largest simulated magnitude over all probes (1 m if all are zero).

    Raises:
        MeasurementError: the field has no point within max_distance of a probe
    """
    field_points = np.asarray(field_points, dtype=float).reshape(-1, 3)
    field_displacements = np.asarray(field_displacements, dtype=float).reshape(-1, 3)
    if len(field_points) == 0:
        raise MeasurementError("reference field is empty")

    dist, idx = cKDTree(field_points).query(sample.probes.positions)
    far = np.nonzero(dist > max_distance)[0]
    if len(far):
        p = sample.probes.points[int(far[0])]
        raise MeasurementError(
            f"reference field does not cover probe side {p.side} index {p.index}: "
            f"nearest field point is {dist[far[0]]:.6g} m away (limit {max_distance:.6g} m)"
        )

    sim = sample.magnitudes
    ref = np.linalg.norm(field_displacements[idx], axis=1)
    fallback = sim.max() if sim.max() > 0 else 1.0
    denom = np.where(sim > 0, sim, fallback)
    rel = np.abs(sim - ref) / denom
    return ProbeComparison(sim, ref, rel, float(100.0 * np.sqrt(np.mean(rel ** 2))))
