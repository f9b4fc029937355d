"""
Region-based shape matching.

A body is tiled by overlapping clusters. Each cluster pulls its members toward
the best rigid fit of its rest shape; a particle's displacement is the mean of
the corrections it receives from every cluster that contains it.

Masses are uniform (unit) for centroid and moment computations, including
pinned particles, which still contribute to the fit but never move.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

import config
from config import RegionNorm
from exceptions import ConfigError, CoverageError
from simulation.constraints import DistanceLink, LinkBatch, corrected_stiffness

logger = logging.getLogger(__name__)

# |det A| below this fraction of ||A||_F^3 counts as rank-deficient
RANK_EPS = 1e-12

# Membership radius slack so particles exactly on the region boundary are kept
_MEMBERSHIP_SLACK = 1e-9


@dataclass
class ClusterParams:
    """Shape-matching and link parameters for one structure."""
    cluster_spacing: float
    cluster_radius: float
    cluster_stiffness: float
    link_radius: float
    link_stiffness: float
    region_norm: RegionNorm = RegionNorm.CHEBYSHEV

    def validate(self, require_coverage: bool = True) -> "ClusterParams":
        """Check ranges; the coverage rule radius >= spacing/2 is optional."""
        for name in ("cluster_spacing", "cluster_radius", "link_radius"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be > 0, got {value}")
        for name in ("cluster_stiffness", "link_stiffness"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ConfigError(f"{name} must be within [0, 1], got {value}")
        if require_coverage and self.cluster_radius < self.cluster_spacing / 2.0 - 1e-15:
            raise ConfigError(
                f"cluster_radius {self.cluster_radius} is below half the cluster_spacing "
                f"{self.cluster_spacing}; some particles would fall in no cluster"
            )
        return self

    def to_dict(self) -> Dict:
        return {
            "cluster_spacing": self.cluster_spacing,
            "cluster_radius": self.cluster_radius,
            "cluster_stiffness": self.cluster_stiffness,
            "link_radius": self.link_radius,
            "link_stiffness": self.link_stiffness,
        }

    def key(self) -> Tuple[float, ...]:
        return tuple(round(float(v), 12) for v in self.to_dict().values())


@dataclass
class ShapeCluster:
    """One shape-matching region."""
    member_indices: np.ndarray
    rest_positions: np.ndarray
    stiffness: float
    rest_centroid: np.ndarray = None

    def __post_init__(self):
        self.member_indices = np.asarray(self.member_indices, dtype=np.int64)
        self.rest_positions = np.asarray(self.rest_positions, dtype=float).reshape(-1, 3)
        if len(self.member_indices) == 0:
            raise ConfigError("cluster has no members")
        if len(np.unique(self.member_indices)) != len(self.member_indices):
            raise ConfigError("cluster has duplicate members")
        if len(self.rest_positions) != len(self.member_indices):
            raise ConfigError("cluster rest positions do not match its members")
        if not (0.0 <= self.stiffness <= 1.0):
            raise ConfigError(f"cluster stiffness must be within [0, 1], got {self.stiffness}")
        if self.rest_centroid is None:
            self.rest_centroid = self.rest_positions.mean(axis=0)
        else:
            self.rest_centroid = np.asarray(self.rest_centroid, dtype=float)

    @property
    def size(self) -> int:
        return len(self.member_indices)


# =============================================================================
# CLUSTER CONSTRUCTION
# =============================================================================

def cluster_centers(particles: np.ndarray, spacing: float) -> np.ndarray:
    """
    Grid of centres with pitch `spacing`, anchored at the bounding-box minimum.

    The last centre on each axis lies within spacing / 2 of the particle maximum,
    so every particle is within spacing / 2 of a centre along every axis.
    """
    lo = particles.min(axis=0)
    extent = particles.max(axis=0) - lo
    counts = [max(int(np.ceil(extent[a] / spacing - 0.5 - 1e-9)), 0) + 1 for a in range(3)]
    axes = [lo[a] + spacing * np.arange(counts[a]) for a in range(3)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)


def build_clusters(
    particles: np.ndarray,
    params: ClusterParams,
    index_offset: int = 0,
) -> List[ShapeCluster]:
    """
    Tile a particle set with overlapping clusters.

    Args:
        particles: (N, 3) rest positions
        params: cluster spacing / radius / stiffness
        index_offset: added to member indices (position of the body in the scene)

    Returns:
        Non-empty clusters covering every particle

    Raises:
        CoverageError: a particle lies in no cluster
    """
    particles = np.asarray(particles, dtype=float).reshape(-1, 3)
    if len(particles) == 0:
        raise ConfigError("cannot build clusters for an empty particle set")
    params.validate(require_coverage=False)

    centers = cluster_centers(particles, params.cluster_spacing)
    p_norm = np.inf if RegionNorm(params.region_norm) == RegionNorm.CHEBYSHEV else 2
    tree = cKDTree(particles)
    radius = params.cluster_radius * (1.0 + _MEMBERSHIP_SLACK)
    memberships = tree.query_ball_point(centers, r=radius, p=p_norm)

    clusters = []
    covered = np.zeros(len(particles), dtype=bool)
    for members in memberships:
        if not members:
            continue
        members = np.sort(np.asarray(members, dtype=np.int64))
        covered[members] = True
        clusters.append(ShapeCluster(
            member_indices=members + index_offset,
            rest_positions=particles[members],
            stiffness=params.cluster_stiffness,
        ))

    orphans = np.nonzero(~covered)[0]
    if len(orphans):
        first = int(orphans[0])
        raise CoverageError(first + index_offset, particles[first])

    logger.debug(
        f"Built {len(clusters)} clusters over {len(particles)} particles "
        f"(spacing {params.cluster_spacing:g}, radius {params.cluster_radius:g})"
    )
    return clusters


def build_links(
    particles: np.ndarray,
    link_radius: float,
    link_stiffness: float,
    index_offset: int = 0,
) -> List[DistanceLink]:
    """One distance link per particle pair closer than link_radius."""
    batch = build_link_batch(particles, link_radius, link_stiffness, index_offset)
    return batch.to_links()


def build_link_batch(
    particles: np.ndarray,
    link_radius: float,
    link_stiffness: float,
    index_offset: int = 0,
) -> LinkBatch:
    """Array form of build_links, sorted by (i, j)."""
    if link_radius <= 0:
        raise ConfigError(f"link_radius must be > 0, got {link_radius}")
    particles = np.asarray(particles, dtype=float).reshape(-1, 3)
    if len(particles) < 2:
        return LinkBatch.empty()

    pairs = cKDTree(particles).query_pairs(r=link_radius * (1.0 + _MEMBERSHIP_SLACK), output_type="ndarray")
    if len(pairs) == 0:
        return LinkBatch.empty()
    pairs = np.sort(pairs, axis=1)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    pairs = pairs[order]
    rest = np.linalg.norm(particles[pairs[:, 1]] - particles[pairs[:, 0]], axis=1)
    keep = rest > 0
    pairs, rest = pairs[keep], rest[keep]
    return LinkBatch(
        i=pairs[:, 0] + index_offset,
        j=pairs[:, 1] + index_offset,
        rest_length=rest,
        stiffness=np.full(len(rest), float(link_stiffness)),
    )


# =============================================================================
# ROTATION EXTRACTION
# =============================================================================

def svd_rotation(A: np.ndarray) -> np.ndarray:
    """Closest proper rotation U diag(1, 1, det(U V^T)) V^T, batched."""
    U, _, Vt = np.linalg.svd(np.asarray(A, dtype=float))
    d = np.where(np.linalg.det(U @ Vt) < 0, -1.0, 1.0)
    U = U.copy()
    U[..., :, 2] *= d[..., None]
    return U @ Vt


def polar_rotation(
    A: np.ndarray,
    tol: float = config.POLAR_TOLERANCE,
    max_iter: int = config.POLAR_MAX_ITERATIONS,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rotation factor of the polar decomposition of 3x3 matrices.

    Scaled Newton iteration X <- (gX + X^-T / g) / 2 on matrices with positive
    determinant; negative determinants and slow convergence fall back to SVD
    with a reflection fix. Rank-deficient matrices get the identity.

    Args:
        A: (3, 3) or (K, 3, 3)

    Returns:
        (R, degenerate) with R shaped like A and degenerate a (K,) bool mask
    """
    A = np.asarray(A, dtype=float)
    single = A.ndim == 2
    if single:
        A = A[None]
    K = len(A)
    R = np.broadcast_to(np.eye(3), (K, 3, 3)).copy()
    if K == 0:
        return R, np.zeros(0, dtype=bool)

    scale = np.linalg.norm(A, axis=(1, 2))
    safe = np.where(scale > 0, scale, 1.0)
    det = np.linalg.det(A / safe[:, None, None])
    degenerate = (scale <= 1e-300) | (np.abs(det) <= RANK_EPS) | ~np.isfinite(det)

    newton = ~degenerate & (det > 0)
    idx = np.nonzero(newton)[0]
    X = A[idx] / safe[idx, None, None]
    done = np.zeros(len(idx), dtype=bool)
    last_delta = np.full(len(idx), np.inf)
    for _ in range(max_iter):
        active = np.nonzero(~done)[0]
        if len(active) == 0:
            break
        Xa = X[active]
        Xinv_t = np.transpose(np.linalg.inv(Xa), (0, 2, 1))
        # Higham scaling while far from convergence, plain Newton near it
        g = np.sqrt(np.linalg.norm(Xinv_t, axis=(1, 2)) / np.linalg.norm(Xa, axis=(1, 2)))
        g = np.where(last_delta[active] > 1e-2, g, 1.0)
        Xn = 0.5 * (g[:, None, None] * Xa + Xinv_t / g[:, None, None])
        delta = np.linalg.norm(Xn - Xa, axis=(1, 2))
        X[active] = Xn
        last_delta[active] = delta
        done[active] = delta < tol
    R[idx[done]] = X[done]

    fallback = (~degenerate & ~newton)
    fallback[idx[~done]] = True
    fb = np.nonzero(fallback)[0]
    if len(fb):
        R[fb] = svd_rotation(A[fb])

    if single:
        return R[0], degenerate
    return R, degenerate


# =============================================================================
# PROJECTION
# =============================================================================

@dataclass
class ShapeMatchResult:
    """Corrections for the members of one or more clusters."""
    corrections: np.ndarray        # (M, 3), aligned with the batch membership order
    goals: np.ndarray              # (M, 3)
    rotations: np.ndarray          # (K, 3, 3)
    degenerate: np.ndarray         # (K,) bool

    @property
    def degenerate_count(self) -> int:
        return int(self.degenerate.sum())


class ClusterBatch:
    """All clusters of a scene, flattened for vectorized projection."""

    def __init__(self, clusters: Sequence[ShapeCluster], count: int):
        clusters = list(clusters)
        self.count = int(count)
        self.size = len(clusters)
        self.last_residual = 0.0
        if not clusters:
            self.members = np.zeros(0, dtype=np.int64)
            self.owner = np.zeros(0, dtype=np.int64)
            self.starts = np.zeros(0, dtype=np.int64)
            self.rest_local = np.zeros((0, 3))
            self.stiffness = np.zeros(0)
            self.sizes = np.zeros(0, dtype=np.int64)
            self.cover = np.zeros(self.count, dtype=np.int64)
            return
        self.sizes = np.array([c.size for c in clusters], dtype=np.int64)
        self.members = np.concatenate([c.member_indices for c in clusters])
        self.owner = np.repeat(np.arange(len(clusters)), self.sizes)
        self.starts = np.concatenate([[0], np.cumsum(self.sizes)[:-1]])
        self.rest_local = np.concatenate([c.rest_positions - c.rest_centroid for c in clusters])
        self.stiffness = np.array([c.stiffness for c in clusters], dtype=float)
        if self.members.max() >= self.count:
            raise ConfigError("cluster member index exceeds particle count")
        self.cover = np.bincount(self.members, minlength=self.count)

    def __len__(self) -> int:
        return self.size

    def solve(self, predicted: np.ndarray, inv_mass: np.ndarray, iterations: int = 1) -> ShapeMatchResult:
        """Goal positions and stiffness-scaled corrections for every member."""
        if self.size == 0:
            return ShapeMatchResult(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 3, 3)), np.zeros(0, dtype=bool))
        p = predicted[self.members]
        c = np.add.reduceat(p, self.starts, axis=0) / self.sizes[:, None]
        rel = p - c[self.owner]
        A = np.add.reduceat(rel[:, :, None] * self.rest_local[:, None, :], self.starts, axis=0)
        R, degenerate = polar_rotation(A)
        goals = np.einsum("mij,mj->mi", R[self.owner], self.rest_local) + c[self.owner]
        k = corrected_stiffness(self.stiffness, iterations)
        corrections = k[self.owner][:, None] * (goals - p)
        corrections[inv_mass[self.members] == 0] = 0.0
        return ShapeMatchResult(corrections, goals, R, degenerate)

    def blend(self, corrections: np.ndarray) -> np.ndarray:
        """Mean correction per particle over the clusters containing it."""
        out = np.zeros((self.count, 3))
        for d in range(3):
            out[:, d] = np.bincount(self.members, weights=corrections[:, d], minlength=self.count)
        covered = self.cover > 0
        out[covered] /= self.cover[covered, None]
        return out

    def project(self, predicted: np.ndarray, inv_mass: np.ndarray, iterations: int = 1) -> Tuple[np.ndarray, int]:
        """
        Apply one shape-matching pass in place; returns (displacement, degenerate count).

        `last_residual` keeps the mean |goal - p| over memberships seen by the pass.
        """
        result = self.solve(predicted, inv_mass, iterations)
        if self.size:
            self.last_residual = float(np.linalg.norm(result.goals - predicted[self.members], axis=1).mean())
        displacement = self.blend(result.corrections)
        predicted += displacement
        if result.degenerate_count:
            logger.debug(f"{result.degenerate_count} degenerate cluster(s) used identity rotation")
        return displacement, result.degenerate_count


def project_shape_matching(
    cluster: ShapeCluster,
    predicted: np.ndarray,
    inv_mass: np.ndarray,
    iterations: int = 1,
) -> ShapeMatchResult:
    """Corrections for a single cluster, ordered like cluster.member_indices."""
    predicted = np.asarray(predicted, dtype=float)
    if cluster.member_indices.max() >= len(predicted):
        raise ConfigError("cluster member index exceeds particle count")
    return ClusterBatch([cluster], len(predicted)).solve(predicted, np.asarray(inv_mass, dtype=float), iterations)


def blend_overlapping_corrections(
    corrections: Sequence[Tuple[Sequence[int], np.ndarray]],
    count: int,
) -> np.ndarray:
    """
    Average per-cluster corrections into per-particle displacements.

    Args:
        corrections: (member_indices, (M, 3) corrections) per cluster
        count: number of particles

    Returns:
        (count, 3) displacement; particles in no cluster get zero
    """
    total = np.zeros((count, 3))
    hits = np.zeros(count, dtype=np.int64)
    for members, corr in corrections:
        members = np.asarray(members, dtype=np.int64)
        corr = np.asarray(corr, dtype=float).reshape(-1, 3)
        np.add.at(total, members, corr)
        np.add.at(hits, members, 1)
    covered = hits > 0
    total[covered] /= hits[covered, None]
    return total
