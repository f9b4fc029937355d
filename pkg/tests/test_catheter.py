import numpy as np
import pytest

from exceptions import ConfigError
from simulation.catheter import (
    CatheterContact,
    CatheterRig,
    perpendicular_basis,
    pose_at,
    project_collisions,
    surface_distance,
)

R = 0.00125


@pytest.fixture
def rig():
    # Tip starts at x = 10 mm heading +x; the shaft trails back to x = -40 mm
    return CatheterRig.create(R, (0.01, 0.0, 0.0), (1.0, 0.0, 0.0), 0.0005, 0.05)


def _push(pose, points, margin=0.0, inv_mass=None):
    points = np.array(points, dtype=float).reshape(-1, 3)
    inv_mass = np.ones(len(points)) if inv_mass is None else np.asarray(inv_mass, dtype=float)
    result = project_collisions(pose, points, inv_mass, margin)
    return points + result.corrections, result


# =============================================================================
# KINEMATICS
# =============================================================================

def test_pose_advances_at_constant_speed(rig):
    pose = pose_at(rig, 10.0)
    assert pose.tip == pytest.approx([0.015, 0.0, 0.0])
    assert pose.tail == pytest.approx([0.015 - 0.05, 0.0, 0.0])
    assert pose.radius == R


def test_pose_at_zero_is_start(rig):
    assert np.array_equal(pose_at(rig, 0.0).tip, rig.start_tip)


def test_zero_speed_pose_is_constant():
    rig = CatheterRig.create(R, (0.0, 0.0, 0.0), (0.0, 0.0, 2.0), 0.0, 0.05)
    assert np.array_equal(pose_at(rig, 0.0).tip, pose_at(rig, 100.0).tip)
    assert rig.direction == pytest.approx([0.0, 0.0, 1.0])


@pytest.mark.parametrize("kwargs", [
    {"radius": 0.0},
    {"speed": -1.0},
    {"shaft_length": 0.0},
])
def test_rig_validation(kwargs):
    base = dict(radius=R, start_tip=(0, 0, 0), direction=(1, 0, 0), speed=0.0005, shaft_length=0.05)
    base.update(kwargs)
    with pytest.raises(ConfigError):
        CatheterRig.create(**base)


def test_rig_rejects_non_unit_direction():
    with pytest.raises(ConfigError):
        CatheterRig(R, np.zeros(3), np.array([2.0, 0.0, 0.0]), 0.0005, 0.05)


@pytest.mark.parametrize("direction", [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1), (-0.3, 0.2, 0.9)])
def test_perpendicular_basis_is_orthonormal(direction):
    a = np.asarray(direction, dtype=float)
    a /= np.linalg.norm(a)
    u, v = perpendicular_basis(a)
    assert abs(u @ a) < 1e-12 and abs(v @ a) < 1e-12 and abs(u @ v) < 1e-12
    assert np.linalg.norm(u) == pytest.approx(1.0)
    assert np.linalg.norm(v) == pytest.approx(1.0)


# =============================================================================
# CONTACT PROJECTION
# =============================================================================

def test_particle_outside_is_untouched(rig):
    pose = pose_at(rig, 0.0)
    moved, result = _push(pose, [[0.0, 0.002, 0.0]])
    assert result.count == 0
    assert np.array_equal(moved, [[0.0, 0.002, 0.0]])


def test_shaft_contact_pushes_radially(rig):
    pose = pose_at(rig, 0.0)
    moved, result = _push(pose, [[0.0, 0.0005, 0.0]])
    assert result.count == 1
    assert moved[0] == pytest.approx([0.0, R, 0.0])


def test_tip_contact_pushes_along_ray_from_tip_centre(rig):
    pose = pose_at(rig, 0.0)
    offset = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0) * 0.001
    moved, _ = _push(pose, [pose.tip + offset])
    assert moved[0] == pytest.approx(pose.tip + offset / 0.001 * R)


def test_margin_extends_push_distance(rig):
    pose = pose_at(rig, 0.0)
    moved, _ = _push(pose, [[0.0, 0.0005, 0.0]], margin=0.0002)
    assert moved[0] == pytest.approx([0.0, R + 0.0002, 0.0])


def test_on_axis_particle_is_counted_and_pushed_out(rig):
    pose = pose_at(rig, 0.0)
    moved, result = _push(pose, [[0.0, 0.0, 0.0]])
    assert result.on_axis == 1
    u, _ = perpendicular_basis(pose.axis)
    assert moved[0] == pytest.approx(R * u)


def test_pinned_particles_are_untouched(rig):
    pose = pose_at(rig, 0.0)
    moved, result = _push(pose, [[0.0, 0.0005, 0.0]], inv_mass=[0.0])
    assert result.count == 0
    assert np.array_equal(moved, [[0.0, 0.0005, 0.0]])


def test_projection_is_sound_and_idempotent(rng):
    for _ in range(1000):
        direction = rng.normal(size=3)
        rig = CatheterRig.create(
            rng.uniform(0.0005, 0.003), rng.normal(scale=0.01, size=3), direction, 0.0005, rng.uniform(0.01, 0.05),
        )
        pose = pose_at(rig, 0.0)
        point = pose.tail + rng.uniform(-0.2, 1.2) * (pose.tip - pose.tail) + rng.normal(scale=0.002, size=3)
        once, _ = _push(pose, [point])
        twice, _ = _push(pose, once)
        assert surface_distance(pose, once)[0] >= -1e-9
        assert np.allclose(twice, once, rtol=0, atol=1e-12)


def test_shaft_contacts_keep_their_axial_station(rng, rig):
    pose = pose_at(rig, 0.0)
    x = rng.uniform(-0.035, 0.005, 200)
    radial = rng.uniform(0.0, R * 0.95, 200)
    angle = rng.uniform(0.0, 2 * np.pi, 200)
    points = np.column_stack([x, radial * np.cos(angle), radial * np.sin(angle)])
    moved, result = _push(pose, points)
    assert result.count == 200
    assert np.abs(moved[:, 0] - points[:, 0]).max() < 1e-12
    assert np.linalg.norm(moved[:, 1:], axis=1) == pytest.approx(np.full(200, R))


def test_contact_follows_the_rig_in_time(rig):
    contact = CatheterContact(rig)
    predicted = np.array([[0.012, 0.0005, 0.0]])
    # Ahead of the tip at t = 0
    assert contact.project(predicted.copy(), np.ones(1), 0.0, 1 / 60).count == 0
    # Engulfed once the tip has moved 5 mm
    assert contact.project(predicted, np.ones(1), 10.0, 1 / 60).count == 1
    assert contact.clearance(predicted, np.ones(1), 10.0) == pytest.approx(0.0, abs=1e-12)


def test_friction_drags_contacts_forward(rig):
    contact = CatheterContact(rig, friction=0.5)
    predicted = np.array([[0.0, 0.0005, 0.0]])
    contact.project(predicted, np.ones(1), 0.0, 1.0)
    assert predicted[0][0] == pytest.approx(0.5 * rig.speed)


def test_contact_rejects_negative_margin(rig):
    with pytest.raises(ConfigError):
        CatheterContact(rig, margin=-0.001)
