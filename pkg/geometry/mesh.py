"""
Triangle meshes: OBJ-subset loading, primitive construction, volume checks.

Only `v` and `f` records are read. Face indices are 1-based; `f 1/2/3 ...`
style references keep the vertex index only, and polygons are fan-triangulated.
"""
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np

from exceptions import ConfigError, MeshParseError

logger = logging.getLogger(__name__)

# Triangles with area below this (relative to the squared bbox diagonal) are dropped.
DEGENERATE_AREA_EPS = 1e-14


@dataclass
class TriangleMesh:
    """Closed (or nearly closed) triangle surface in meters."""
    vertices: np.ndarray          # (V, 3) float
    triangles: np.ndarray         # (T, 3) int
    name: str = "mesh"
    dropped_triangles: int = 0

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise ConfigError(f"mesh '{self.name}': triangle index out of range")

    @property
    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def extents(self) -> np.ndarray:
        lo, hi = self.bounds
        return hi - lo

    def corners(self) -> np.ndarray:
        """(T, 3, 3) array of triangle vertex positions."""
        return self.vertices[self.triangles]

    def translated(self, offset: Sequence[float]) -> "TriangleMesh":
        return TriangleMesh(
            vertices=self.vertices + np.asarray(offset, dtype=float),
            triangles=self.triangles.copy(),
            name=self.name,
            dropped_triangles=self.dropped_triangles,
        )


def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    tri = vertices[triangles]
    return 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)


def signed_volume(mesh: TriangleMesh) -> float:
    """Enclosed volume by the divergence theorem; positive for outward winding."""
    tri = mesh.corners()
    return float(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0)


def _drop_degenerate(vertices: np.ndarray, triangles: np.ndarray, name: str) -> Tuple[np.ndarray, int]:
    if len(triangles) == 0:
        return triangles, 0
    diag = float(np.linalg.norm(vertices.max(axis=0) - vertices.min(axis=0)))
    areas = triangle_areas(vertices, triangles)
    repeated = (
        (triangles[:, 0] == triangles[:, 1])
        | (triangles[:, 1] == triangles[:, 2])
        | (triangles[:, 0] == triangles[:, 2])
    )
    keep = (areas > DEGENERATE_AREA_EPS * max(diag, 1e-300) ** 2) & ~repeated
    dropped = int((~keep).sum())
    if dropped:
        logger.warning(f"{name}: dropped {dropped} degenerate triangle(s)")
    return triangles[keep], dropped


def _check_manifold(triangles: np.ndarray, name: str) -> bool:
    """Warn when an edge is not shared by exactly two triangles."""
    edges = Counter()
    for a, b, c in triangles.tolist():
        for u, v in ((a, b), (b, c), (c, a)):
            edges[(min(u, v), max(u, v))] += 1
    bad = sum(1 for n in edges.values() if n != 2)
    if bad:
        logger.warning(f"{name}: {bad} non-manifold or boundary edge(s); sampling will use majority vote")
    return bad == 0


def load_mesh(path: Union[str, Path], units_scale: float = 1.0, name: str = None) -> TriangleMesh:
    """
    Load an OBJ-subset mesh file.

    Args:
        path: mesh file
        units_scale: factor converting file units to meters (0.001 for mm)
        name: mesh name, defaults to the file stem

    Returns:
        TriangleMesh with degenerate triangles removed
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"mesh file not found: {path}")
    if units_scale <= 0:
        raise ConfigError(f"units_scale must be > 0, got {units_scale}")

    vertices = []
    triangles = []
    with open(path, "r") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            tag = tokens[0]
            if tag == "v":
                if len(tokens) < 4:
                    raise MeshParseError("vertex record needs 3 coordinates", str(path), lineno)
                try:
                    vertices.append([float(t) for t in tokens[1:4]])
                except ValueError:
                    raise MeshParseError(f"bad vertex coordinate in '{line}'", str(path), lineno)
            elif tag == "f":
                if len(tokens) < 4:
                    raise MeshParseError("face record needs at least 3 vertices", str(path), lineno)
                try:
                    idx = [int(t.split("/")[0]) for t in tokens[1:]]
                except ValueError:
                    raise MeshParseError(f"bad face index in '{line}'", str(path), lineno)
                # Negative indices count back from the latest vertex
                idx = [i - 1 if i > 0 else len(vertices) + i for i in idx]
                for i in idx:
                    if i < 0 or i >= len(vertices):
                        raise MeshParseError(f"face index {i + 1} out of range", str(path), lineno)
                for k in range(1, len(idx) - 1):
                    triangles.append([idx[0], idx[k], idx[k + 1]])

    if not vertices:
        raise MeshParseError("no vertex records", str(path))
    if not triangles:
        raise MeshParseError("no face records", str(path))

    verts = np.asarray(vertices, dtype=float) * units_scale
    tris = np.asarray(triangles, dtype=np.int64)
    mesh_name = name or path.stem
    tris, dropped = _drop_degenerate(verts, tris, mesh_name)
    if len(tris) == 0:
        raise MeshParseError("all triangles are degenerate", str(path))
    _check_manifold(tris, mesh_name)

    logger.info(f"Loaded mesh {mesh_name}: {len(verts)} vertices, {len(tris)} triangles")
    return TriangleMesh(vertices=verts, triangles=tris, name=mesh_name, dropped_triangles=dropped)


def save_mesh(mesh: TriangleMesh, path: Union[str, Path], units_scale: float = 1.0) -> Path:
    """Write an OBJ-subset file; coordinates are divided by units_scale."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(f"# {mesh.name}\n")
        for v in mesh.vertices / units_scale:
            f.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for t in mesh.triangles + 1:
            f.write(f"f {t[0]} {t[1]} {t[2]}\n")
    return path


def make_box_mesh(dimensions: Sequence[float], name: str = "box") -> TriangleMesh:
    """Axis-aligned box centered at the origin, outward-facing triangles."""
    dims = np.asarray(dimensions, dtype=float)
    if dims.shape != (3,) or np.any(dims <= 0):
        raise ConfigError(f"box dimensions must be three positive lengths, got {list(dimensions)}")
    hx, hy, hz = dims / 2.0
    vertices = np.array([
        [-hx, -hy, -hz], [hx, -hy, -hz], [hx, hy, -hz], [-hx, hy, -hz],
        [-hx, -hy, hz], [hx, -hy, hz], [hx, hy, hz], [-hx, hy, hz],
    ])
    triangles = np.array([
        [0, 2, 1], [0, 3, 2],   # z-
        [4, 5, 6], [4, 6, 7],   # z+
        [0, 1, 5], [0, 5, 4],   # y-
        [3, 7, 6], [3, 6, 2],   # y+
        [0, 4, 7], [0, 7, 3],   # x-
        [1, 2, 6], [1, 6, 5],   # x+
    ])
    return TriangleMesh(vertices=vertices, triangles=triangles, name=name)


def make_ellipsoid_mesh(
    radii: Sequence[float],
    center: Sequence[float] = (0.0, 0.0, 0.0),
    rings: int = 16,
    segments: int = 32,
    name: str = "ellipsoid",
) -> TriangleMesh:
    """UV-sphere scaled to an ellipsoid. Poles lie on the z axis."""
    radii = np.asarray(radii, dtype=float)
    if radii.shape != (3,) or np.any(radii <= 0):
        raise ConfigError(f"ellipsoid radii must be three positive lengths, got {list(radii)}")
    if rings < 2 or segments < 3:
        raise ConfigError("ellipsoid needs rings >= 2 and segments >= 3")

    theta = np.linspace(0.0, np.pi, rings + 1)[1:-1]
    phi = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
    st, ct = np.sin(theta), np.cos(theta)
    ring_pts = np.stack([
        np.outer(st, np.cos(phi)),
        np.outer(st, np.sin(phi)),
        np.outer(ct, np.ones_like(phi)),
    ], axis=-1).reshape(-1, 3)
    vertices = np.vstack([[0.0, 0.0, 1.0], ring_pts, [0.0, 0.0, -1.0]])

    top, bottom = 0, len(vertices) - 1
    tris = []
    for j in range(segments):
        jn = (j + 1) % segments
        tris.append([top, 1 + j, 1 + jn])
    for i in range(rings - 2):
        a0 = 1 + i * segments
        b0 = 1 + (i + 1) * segments
        for j in range(segments):
            jn = (j + 1) % segments
            tris.append([a0 + j, b0 + j, b0 + jn])
            tris.append([a0 + j, b0 + jn, a0 + jn])
    last = 1 + (rings - 2) * segments
    for j in range(segments):
        jn = (j + 1) % segments
        tris.append([last + j, bottom, last + jn])

    vertices = vertices * radii + np.asarray(center, dtype=float)
    return TriangleMesh(vertices=vertices, triangles=np.asarray(tris), name=name)
