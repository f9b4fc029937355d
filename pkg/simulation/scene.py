"""
Scene assembly: meshes -> particles -> clusters and links -> ParticleSystem.
"""
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from config import BoxFace
from exceptions import ConfigError
from geometry.mesh import TriangleMesh
from geometry.sampling import sample_volume
from simulation.constraints import ConstraintSet, LinkBatch
from simulation.engine import ParticleSystem
from simulation.shape_match import ClusterBatch, build_clusters

if TYPE_CHECKING:
    from calibration.params import StructureParams

logger = logging.getLogger(__name__)


@dataclass
class SoftBody:
    """Contiguous particle range belonging to one anatomical structure."""
    name: str
    start: int
    stop: int
    params: "StructureParams"
    num_clusters: int = 0

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.stop)

    @property
    def count(self) -> int:
        return self.stop - self.start


@dataclass
class Scene:
    system: ParticleSystem
    rest_positions: np.ndarray
    bodies: List[SoftBody]
    constraints: ConstraintSet
    particle_spacing: float
    seed: Optional[int] = None

    @property
    def structure_names(self) -> List[str]:
        return [b.name for b in self.bodies]

    def body(self, name: str) -> SoftBody:
        for b in self.bodies:
            if b.name == name:
                return b
        raise KeyError(f"no structure named '{name}'")

    def structure_indices(self) -> Dict[str, np.ndarray]:
        return {b.name: b.indices for b in self.bodies}

    @property
    def pinned_count(self) -> int:
        return int((self.system.inv_mass == 0).sum())


def jitter_positions(positions: np.ndarray, amplitude: float, seed: int) -> np.ndarray:
    """Uniform noise in [-amplitude, amplitude] per coordinate, seeded."""
    if amplitude <= 0:
        return positions
    rng = np.random.default_rng(seed)
    return positions + rng.uniform(-amplitude, amplitude, size=positions.shape)


def pinned_face_indices(positions: np.ndarray, faces: Sequence[BoxFace], tolerance: float) -> np.ndarray:
    """Particles within `tolerance` of the listed bounding-box faces."""
    if not faces or len(positions) == 0:
        return np.zeros(0, dtype=np.int64)
    lo = positions.min(axis=0)
    hi = positions.max(axis=0)
    mask = np.zeros(len(positions), dtype=bool)
    for face in faces:
        face = BoxFace(face)
        axis = "xyz".index(face.value[0])
        if face.value.endswith("min"):
            mask |= positions[:, axis] <= lo[axis] + tolerance
        else:
            mask |= positions[:, axis] >= hi[axis] - tolerance
    return np.nonzero(mask)[0]


def _carve(samples: List[np.ndarray], spacings: List[float]) -> List[np.ndarray]:
    """Drop particles of earlier structures that fall in a later structure's grid cells."""
    carved = []
    for i, pts in enumerate(samples):
        keep = np.ones(len(pts), dtype=bool)
        for j in range(i + 1, len(samples)):
            if len(samples[j]) == 0:
                continue
            tree = cKDTree(samples[j])
            dist, _ = tree.query(pts, p=np.inf, distance_upper_bound=0.5 * spacings[j])
            keep &= ~np.isfinite(dist)
        dropped = int((~keep).sum())
        if dropped:
            logger.debug(f"structure {i}: {dropped} particle(s) replaced by nested structures")
        carved.append(pts[keep])
    return carved


def _scene_links(positions: np.ndarray, body_id: np.ndarray, params: List["StructureParams"]) -> LinkBatch:
    """
    Links within and across bodies.

    Within a body the body's link radius and stiffness apply; across two
    bodies the smaller radius and the smaller stiffness.
    """
    radii = np.array([p.cluster.link_radius for p in params])
    stiff = np.array([p.cluster.link_stiffness for p in params])
    if len(positions) < 2:
        return LinkBatch.empty()
    pairs = cKDTree(positions).query_pairs(r=radii.max() * (1.0 + 1e-9), output_type="ndarray")
    if len(pairs) == 0:
        return LinkBatch.empty()
    pairs = np.sort(pairs, axis=1)
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    bi, bj = body_id[pairs[:, 0]], body_id[pairs[:, 1]]
    limit = np.minimum(radii[bi], radii[bj]) * (1.0 + 1e-9)
    rest = np.linalg.norm(positions[pairs[:, 1]] - positions[pairs[:, 0]], axis=1)
    keep = (rest <= limit) & (rest > 0)
    pairs, rest = pairs[keep], rest[keep]
    k = np.minimum(stiff[bi[keep]], stiff[bj[keep]])
    return LinkBatch(pairs[:, 0], pairs[:, 1], rest, k)


def build_scene(
    structures: Sequence[Tuple[TriangleMesh, "StructureParams"]],
    pinned_faces: Sequence[BoxFace] = (),
    noise_amplitude: float = 0.0,
    seed: Optional[int] = None,
) -> Scene:
    """
    Sample every structure, tile it with clusters and link neighbouring particles.

    Structures listed later take precedence where meshes overlap.

    Args:
        structures: (mesh, params) pairs; params carry particle_spacing and cluster settings
        pinned_faces: scene bounding-box faces whose particles get inv_mass = 0
        noise_amplitude: fraction of particle spacing used as uniform jitter
        seed: noise seed; required when noise_amplitude > 0

    Returns:
        Scene at rest with zero velocities
    """
    if not structures:
        raise ConfigError("scene needs at least one structure")
    if noise_amplitude < 0:
        raise ConfigError(f"noise amplitude must be >= 0, got {noise_amplitude}")
    if noise_amplitude > 0 and seed is None:
        raise ConfigError("noise injection requires a seed")

    names = [p.name for _, p in structures]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate structure names: {names}")

    spacings = [float(p.particle_spacing) for _, p in structures]
    samples = [sample_volume(mesh, s).positions for (mesh, _), s in zip(structures, spacings)]
    samples = _carve(samples, spacings)

    bodies: List[SoftBody] = []
    clusters = []
    blocks = []
    body_ids = []
    start = 0
    for k, ((mesh, params), pts) in enumerate(zip(structures, samples)):
        if len(pts) == 0:
            raise ConfigError(f"structure '{params.name}' has no particles left after nesting")
        if noise_amplitude > 0:
            pts = jitter_positions(pts, noise_amplitude * spacings[k], seed + k)
        body_clusters = build_clusters(pts, params.cluster, index_offset=start)
        clusters.extend(body_clusters)
        bodies.append(SoftBody(params.name, start, start + len(pts), params, len(body_clusters)))
        blocks.append(pts)
        body_ids.append(np.full(len(pts), k, dtype=np.int64))
        start += len(pts)

    positions = np.vstack(blocks)
    body_id = np.concatenate(body_ids)
    links = _scene_links(positions, body_id, [p for _, p in structures])

    system = ParticleSystem.from_positions(positions)
    pinned = pinned_face_indices(positions, pinned_faces, 0.5 * min(spacings))
    system.pin(pinned)

    constraints = ConstraintSet(clusters=ClusterBatch(clusters, len(positions)), links=links)
    scene = Scene(
        system=system,
        rest_positions=positions.copy(),
        bodies=bodies,
        constraints=constraints,
        particle_spacing=min(spacings),
        seed=seed,
    )
    logger.info(
        f"Scene: {system.count} particles, {len(clusters)} clusters, {len(links)} links, "
        f"{len(pinned)} pinned, structures {names}"
    )
    return scene
