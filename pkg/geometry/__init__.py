"""
Mesh loading and volumetric particle sampling
"""
from geometry.mesh import TriangleMesh, load_mesh, save_mesh, make_box_mesh, make_ellipsoid_mesh
from geometry.sampling import ParticleSample, sample_volume

__all__ = [
    'TriangleMesh',
    'load_mesh',
    'save_mesh',
    'make_box_mesh',
    'make_ellipsoid_mesh',
    'ParticleSample',
    'sample_volume',
]
