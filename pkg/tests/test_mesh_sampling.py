import logging

import numpy as np
import pytest
from scipy.spatial import cKDTree

from exceptions import ConfigError, MeshParseError
from geometry.mesh import load_mesh, make_box_mesh, make_ellipsoid_mesh, save_mesh, signed_volume
from geometry.sampling import grid_axes, sample_volume

CUBE_OBJ = """\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 4 8 7
f 4 7 3
f 1 5 8
f 1 8 4
f 2 3 7
f 2 7 6
"""


# =============================================================================
# MESH LOADING
# =============================================================================

def test_load_mesh_scales_into_meters(tmp_path):
    path = tmp_path / "cube.obj"
    path.write_text(CUBE_OBJ)
    mesh = load_mesh(path, units_scale=0.0175)
    assert mesh.extents == pytest.approx([0.0175, 0.0175, 0.0175])
    assert len(mesh.triangles) == 12
    assert signed_volume(mesh) == pytest.approx(0.0175 ** 3)


def test_load_mesh_empty_file(tmp_path):
    path = tmp_path / "empty.obj"
    path.write_text("")
    with pytest.raises(MeshParseError):
        load_mesh(path)


def test_load_mesh_reports_line_of_bad_record(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nv 1 oops 0\nv 0 1 0\nf 1 2 3\n")
    with pytest.raises(MeshParseError) as err:
        load_mesh(path)
    assert err.value.line == 2
    assert "bad.obj:2" in str(err.value)


def test_load_mesh_face_index_out_of_range(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n")
    with pytest.raises(MeshParseError) as err:
        load_mesh(path)
    assert err.value.line == 4


def test_load_mesh_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_mesh(tmp_path / "nowhere.obj")


def test_load_mesh_drops_zero_area_triangle(tmp_path, caplog):
    path = tmp_path / "cube.obj"
    # Vertex 9 sits on the edge 1-2, so face 1 2 9 has zero area
    path.write_text(CUBE_OBJ + "v 0.5 0 0\nf 1 2 9\n")
    with caplog.at_level(logging.WARNING):
        mesh = load_mesh(path)
    assert len(mesh.triangles) == 12
    assert mesh.dropped_triangles == 1
    assert "degenerate" in caplog.text


def test_load_mesh_fan_triangulates_quads(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n")
    mesh = load_mesh(path)
    assert mesh.triangles.tolist() == [[0, 1, 2], [0, 2, 3]]


def test_save_and_load_preserve_geometry(tmp_path):
    box = make_box_mesh((0.05, 0.0175, 0.0175))
    path = save_mesh(box, tmp_path / "box.obj", units_scale=0.001)
    loaded = load_mesh(path, units_scale=0.001)
    assert np.allclose(loaded.vertices, box.vertices, atol=1e-12)
    assert np.array_equal(loaded.triangles, box.triangles)


# =============================================================================
# PRIMITIVES
# =============================================================================

def test_box_mesh_has_phantom_extents():
    mesh = make_box_mesh((0.05, 0.0175, 0.0175))
    assert len(mesh.vertices) == 8
    assert len(mesh.triangles) == 12
    assert mesh.extents == pytest.approx([0.05, 0.0175, 0.0175])
    lo, hi = mesh.bounds
    assert (lo + hi) == pytest.approx([0.0, 0.0, 0.0])


def test_box_mesh_volumes_are_positive():
    assert signed_volume(make_box_mesh((1.0, 1.0, 1.0))) == pytest.approx(1.0)
    assert signed_volume(make_box_mesh((1.0, 2.0, 3.0))) == pytest.approx(6.0)


def test_box_mesh_rejects_non_positive_dimensions():
    with pytest.raises(ConfigError):
        make_box_mesh((1.0, 0.0, 1.0))


def test_ellipsoid_mesh_is_outward_and_close_to_volume():
    mesh = make_ellipsoid_mesh((1.0, 2.0, 3.0), rings=32, segments=64)
    expected = 4.0 / 3.0 * np.pi * 6.0
    assert signed_volume(mesh) > 0
    assert signed_volume(mesh) == pytest.approx(expected, rel=0.02)


# =============================================================================
# SAMPLING
# =============================================================================

def test_phantom_box_sample_count():
    sample = sample_volume(make_box_mesh((0.05, 0.0175, 0.0175)), 0.0025)
    assert sample.count == 20 * 7 * 7


def test_sampled_particles_lie_inside_bounding_box():
    mesh = make_box_mesh((0.05, 0.0175, 0.0175))
    lo, hi = mesh.bounds
    pos = sample_volume(mesh, 0.0025).positions
    assert np.all(pos > lo) and np.all(pos < hi)


def test_sampling_is_deterministic():
    mesh = make_ellipsoid_mesh((0.02, 0.015, 0.01))
    a = sample_volume(mesh, 0.002).positions
    b = sample_volume(mesh, 0.002).positions
    assert np.array_equal(a, b)


def test_sphere_sample_matches_brute_force():
    r = 0.01
    mesh = make_ellipsoid_mesh((r, r, r))
    sample = sample_volume(mesh, r)

    lo, hi = mesh.bounds
    X, Y, Z = np.meshgrid(*grid_axes(lo, hi, r), indexing="ij")
    grid = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    expected = grid[np.linalg.norm(grid, axis=1) < r]

    assert sample.count == len(expected) == 8
    assert np.allclose(np.sort(sample.positions, axis=0), np.sort(expected, axis=0))


def test_particles_keep_half_spacing_apart():
    spacing = 0.002
    pos = sample_volume(make_ellipsoid_mesh((0.02, 0.015, 0.01)), spacing).positions
    dist, _ = cKDTree(pos).query(pos, k=2)
    assert dist[:, 1].min() >= 0.5 * spacing


@pytest.mark.parametrize("mesh, coarse", [
    (make_box_mesh((0.04, 0.02, 0.02)), 0.005),
    (make_ellipsoid_mesh((0.02, 0.02, 0.02)), 0.004),
])
def test_halving_spacing_multiplies_count_by_eight(mesh, coarse):
    n_coarse = sample_volume(mesh, coarse).count
    n_fine = sample_volume(mesh, coarse / 2.0).count
    assert 8 * 0.7 <= n_fine / n_coarse <= 8 * 1.3


def test_too_coarse_spacing_raises():
    mesh = make_box_mesh((0.05, 0.0175, 0.0175))
    diagonal = float(np.linalg.norm(mesh.extents))
    with pytest.raises(ConfigError, match="zero particles"):
        sample_volume(mesh, 10 * diagonal)
