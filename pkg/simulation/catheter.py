"""
Rigid catheter: a capsule advancing at constant speed along a fixed axis.

Contact is a positional projection pushing particles out of the capsule.
It runs last in every solver iteration so the final positions of a step
satisfy non-penetration.
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from exceptions import ConfigError

logger = logging.getLogger(__name__)

# Distance from the axis below which a particle counts as lying on it
_ON_AXIS_EPS = 1e-12


def perpendicular_basis(direction: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Fixed orthonormal (u, v) perpendicular to `direction`.

    u comes from the first of x, y, z not nearly parallel to the direction;
    v = direction x u.
    """
    a = np.asarray(direction, dtype=float)
    a = a / np.linalg.norm(a)
    for ref in np.eye(3):
        if abs(float(ref @ a)) < 0.9:
            break
    u = ref - (ref @ a) * a
    u /= np.linalg.norm(u)
    v = np.cross(a, u)
    return u, v


@dataclass
class CatheterRig:
    radius: float
    start_tip: np.ndarray
    direction: np.ndarray
    speed: float
    shaft_length: float

    def __post_init__(self):
        self.start_tip = np.asarray(self.start_tip, dtype=float).reshape(3)
        self.direction = np.asarray(self.direction, dtype=float).reshape(3)
        if self.radius <= 0:
            raise ConfigError(f"catheter radius must be > 0, got {self.radius}")
        if self.speed < 0:
            raise ConfigError(f"catheter speed must be >= 0, got {self.speed}")
        if self.shaft_length <= 0:
            raise ConfigError(f"catheter shaft_length must be > 0, got {self.shaft_length}")
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-9:
            raise ConfigError(f"catheter direction must be a unit vector, got {self.direction.tolist()}")

    @classmethod
    def create(cls, radius: float, start_tip, direction, speed: float, shaft_length: float) -> "CatheterRig":
        """Build a rig, normalizing the direction."""
        direction = np.asarray(direction, dtype=float)
        norm = np.linalg.norm(direction)
        if norm == 0:
            raise ConfigError("catheter direction must be non-zero")
        return cls(radius, start_tip, direction / norm, speed, shaft_length)


@dataclass
class CapsulePose:
    tip: np.ndarray
    tail: np.ndarray
    radius: float

    def __post_init__(self):
        if np.allclose(self.tip, self.tail):
            raise ConfigError("capsule tip and tail coincide")

    @property
    def axis(self) -> np.ndarray:
        d = self.tip - self.tail
        return d / np.linalg.norm(d)


def pose_at(rig: CatheterRig, t: float) -> CapsulePose:
    """Capsule pose t seconds after insertion start."""
    tip = rig.start_tip + rig.direction * rig.speed * t
    tail = tip - rig.direction * rig.shaft_length
    return CapsulePose(tip=tip, tail=tail, radius=rig.radius)


def _closest_on_segment(pose: CapsulePose, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    ab = pose.tip - pose.tail
    t = np.clip(((points - pose.tail) @ ab) / float(ab @ ab), 0.0, 1.0)
    return pose.tail + t[:, None] * ab, t


def surface_distance(pose: CapsulePose, points: np.ndarray) -> np.ndarray:
    """Signed distance from each point to the capsule surface (negative inside)."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    closest, _ = _closest_on_segment(pose, points)
    return np.linalg.norm(points - closest, axis=1) - pose.radius


def clearance(pose: CapsulePose, positions: np.ndarray, inv_mass: np.ndarray) -> float:
    """Smallest surface distance over free particles; +inf when none are free."""
    free = np.asarray(inv_mass) > 0
    if not free.any():
        return float("inf")
    return float(surface_distance(pose, positions[free]).min())


@dataclass
class ContactResult:
    corrections: np.ndarray   # (N, 3)
    count: int
    on_axis: int


def project_collisions(
    pose: CapsulePose,
    predicted: np.ndarray,
    inv_mass: np.ndarray,
    margin: float = 0.0,
) -> ContactResult:
    """
    Corrections moving every free particle inside the capsule onto radius + margin.

    Particles exactly on the axis segment go out along a fixed perpendicular.
    """
    predicted = np.asarray(predicted, dtype=float)
    corrections = np.zeros_like(predicted)
    target = pose.radius + margin

    # Broad phase: bounding box of the capsule
    lo = np.minimum(pose.tip, pose.tail) - target
    hi = np.maximum(pose.tip, pose.tail) + target
    near = np.nonzero(np.all((predicted >= lo) & (predicted <= hi), axis=1) & (inv_mass > 0))[0]
    if len(near) == 0:
        return ContactResult(corrections, 0, 0)

    p = predicted[near]
    closest, _ = _closest_on_segment(pose, p)
    d = p - closest
    dist = np.linalg.norm(d, axis=1)
    inside = dist < target
    if not inside.any():
        return ContactResult(corrections, 0, 0)

    idx = near[inside]
    d, dist, closest = d[inside], dist[inside], closest[inside]
    on_axis = dist <= _ON_AXIS_EPS * max(pose.radius, 1.0)
    normal = np.empty_like(d)
    normal[~on_axis] = d[~on_axis] / dist[~on_axis, None]
    if on_axis.any():
        u, _ = perpendicular_basis(pose.axis)
        normal[on_axis] = u
    corrections[idx] = closest + normal * target - predicted[idx]
    return ContactResult(corrections, int(len(idx)), int(on_axis.sum()))


class CatheterContact:
    """Capsule contact constraint bound to a rig's motion."""

    def __init__(self, rig: CatheterRig, margin: float = 0.0, friction: float = 0.0):
        if margin < 0:
            raise ConfigError(f"contact margin must be >= 0, got {margin}")
        if friction < 0:
            raise ConfigError(f"contact friction must be >= 0, got {friction}")
        self.rig = rig
        self.margin = margin
        self.friction = friction
        self.on_axis_total = 0

    def project(self, predicted: np.ndarray, inv_mass: np.ndarray, time: float, dt: float) -> ContactResult:
        """Project in place against the capsule at `time`."""
        pose = pose_at(self.rig, time)
        result = project_collisions(pose, predicted, inv_mass, self.margin)
        if result.count and self.friction > 0:
            # Axial drag: contacting particles follow part of the tip advance
            touched = np.any(result.corrections != 0, axis=1)
            drag = min(self.friction, 1.0) * self.rig.speed * dt
            result.corrections[touched] += drag * self.rig.direction
        predicted += result.corrections
        self.on_axis_total += result.on_axis
        return result

    def clearance(self, positions: np.ndarray, inv_mass: np.ndarray, time: float) -> float:
        return clearance(pose_at(self.rig, time), positions, inv_mass)
