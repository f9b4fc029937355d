import numpy as np
import pytest

from exceptions import ConfigError, SimulationInstabilityError
from simulation.catheter import CatheterContact, CatheterRig
from simulation.constraints import ConstraintSet, LinkBatch
from simulation.engine import ParticleSystem, PBDSolver, SimConfig, StepReport, step
from simulation.shape_match import ClusterBatch, ShapeCluster


def _still(**kwargs) -> SimConfig:
    return SimConfig(damping=0.0, **kwargs)


def test_free_particle_at_rest_stays_put():
    system = ParticleSystem.from_positions([[0.1, 0.2, 0.3]])
    solver = PBDSolver(system, ConstraintSet(), _still())
    solver.run(50)
    assert np.array_equal(system.positions, [[0.1, 0.2, 0.3]])


def test_ballistic_update():
    system = ParticleSystem.from_positions([[0.0, 0.0, 0.0]])
    system.velocities[0] = [1.0, 0.0, 0.0]
    step(system, ConstraintSet(), _still(dt=0.01))
    assert system.positions[0] == pytest.approx([0.01, 0.0, 0.0])


def test_gravity_accelerates_free_particles_only():
    system = ParticleSystem.from_positions([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    system.pin([1])
    step(system, ConstraintSet(), _still(dt=0.1, gravity=(0.0, 0.0, -9.81)))
    assert system.velocities[0] == pytest.approx([0.0, 0.0, -0.981])
    assert system.positions[0][2] < 0
    assert np.array_equal(system.positions[1], [1.0, 0.0, 0.0])


def test_two_particle_link_reaches_rest_length():
    system = ParticleSystem.from_positions([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    links = LinkBatch([0], [1], [1.0], [1.0])
    step(system, ConstraintSet(links=links), _still(solver_iterations=20))
    separation = np.linalg.norm(system.positions[1] - system.positions[0])
    assert abs(separation - 1.0) < 1e-3
    # Equal masses: both endpoints move toward the midpoint
    assert system.positions[0][0] == pytest.approx(0.5)
    assert system.positions[1][0] == pytest.approx(1.5)


def test_fully_pinned_body_does_not_move(rng):
    rest = rng.normal(size=(6, 3))
    system = ParticleSystem.from_positions(rest, inv_mass=np.zeros(6))
    predicted_shape = rest + 0.1
    cluster = ShapeCluster(np.arange(6), predicted_shape, stiffness=1.0)
    links = LinkBatch([0, 1], [1, 2], [5.0, 5.0], [1.0, 1.0])
    constraints = ConstraintSet(clusters=ClusterBatch([cluster], 6), links=links)
    PBDSolver(system, constraints, SimConfig()).run(5)
    assert np.array_equal(system.positions, rest)


def test_momentum_conserved_without_constraints(rng):
    system = ParticleSystem.from_positions(rng.normal(size=(20, 3)), inv_mass=rng.uniform(0.5, 2.0, 20))
    system.velocities[:] = rng.normal(size=(20, 3))
    before = system.momentum()
    PBDSolver(system, ConstraintSet(), _still(substeps=3)).run(10)
    assert np.allclose(system.momentum(), before, rtol=0, atol=1e-10)


def _random_tree(rng, n: int):
    """Random tree of unit-mass particles, slightly stretched away from its rest lengths."""
    rest = np.zeros((n, 3))
    parents = []
    for k in range(1, n):
        parent = int(rng.integers(0, k))
        direction = rng.normal(size=3)
        rest[k] = rest[parent] + rng.uniform(0.5, 1.5) * direction / np.linalg.norm(direction)
        parents.append(parent)
    i = np.array(parents)
    j = np.arange(1, n)
    lengths = np.linalg.norm(rest[j] - rest[i], axis=1)
    links = LinkBatch(i, j, lengths, np.ones(n - 1))
    return rest + 1e-4 * rng.normal(size=(n, 3)), links


def test_link_residual_never_grows_across_iterations(rng):
    for _ in range(100):
        n = int(rng.integers(2, 9))
        positions, links = _random_tree(rng, n)
        system = ParticleSystem.from_positions(positions)
        report = step(system, ConstraintSet(links=links), _still(solver_iterations=8))
        r = np.array(report.link_residuals)
        assert len(r) == 9
        assert np.all(r[1:] <= r[:-1] * (1.0 + 1e-9) + 1e-15)


def test_shape_residual_is_reported_per_pass(rng):
    rest = rng.normal(size=(8, 3))
    batch = ClusterBatch([ShapeCluster(np.arange(8), rest, stiffness=1.0)], 8)
    system = ParticleSystem.from_positions(rest + 0.1 * rng.normal(size=(8, 3)))
    report = step(system, ConstraintSet(clusters=batch), _still(solver_iterations=4))
    assert len(report.shape_residuals) == 4
    assert report.shape_residuals[0] > 0.01
    # Full stiffness reaches the rigid fit in one pass
    assert report.shape_residual < 1e-8


def test_contact_clearance_is_reported():
    rig = CatheterRig.create(0.01, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0), 0.0, 0.5)
    system = ParticleSystem.from_positions([[-0.1, 0.005, 0.0], [-0.2, 0.0, 0.03]])
    report = step(system, ConstraintSet(contacts=[CatheterContact(rig)]), _still())
    assert report.contact_clearance == pytest.approx(0.0, abs=1e-12)
    assert report.penetration <= 1e-12


def test_penetration_is_zero_without_contacts():
    report = step(ParticleSystem.from_positions(np.zeros((1, 3))), ConstraintSet(), _still())
    assert report.contact_clearance == float("inf")
    assert report.penetration == 0.0
    assert StepReport(0.0, [], contact_clearance=-0.002).penetration == 0.002


def test_solver_is_deterministic(small_scene):
    a = small_scene()
    b = small_scene()
    for scene in (a, b):
        scene.system.velocities[:, 0] = 0.01
        scene.system.velocities[scene.system.inv_mass == 0] = 0.0
    sa = PBDSolver(a.system, a.constraints, SimConfig())
    sb = PBDSolver(b.system, b.constraints, SimConfig())
    for _ in range(20):
        sa.step()
        sb.step()
        assert np.array_equal(a.system.positions, b.system.positions)


def test_time_is_steps_times_dt():
    solver = PBDSolver(ParticleSystem.from_positions(np.zeros((1, 3))), ConstraintSet(), SimConfig(dt=0.1))
    solver.run(3)
    assert solver.steps == 3
    assert solver.time == 3 * 0.1


def test_non_finite_state_names_particle_and_stage():
    system = ParticleSystem.from_positions(np.zeros((3, 3)))
    system.velocities[1] = [np.inf, 0.0, 0.0]
    with pytest.raises(SimulationInstabilityError) as err:
        step(system, ConstraintSet(), SimConfig(), step_index=7)
    assert err.value.particle == 1
    assert err.value.step == 7
    assert err.value.constraint == "prediction"
    assert "particle=1" in str(err.value)


def test_instability_error_carries_params():
    err = SimulationInstabilityError("boom", step=3).with_params({"cluster_stiffness": 0.5})
    assert err.params == {"cluster_stiffness": 0.5}
    assert "cluster_stiffness" in str(err)
    assert err.step == 3


@pytest.mark.parametrize("kwargs", [
    {"dt": 0.0},
    {"solver_iterations": 0},
    {"substeps": 0},
    {"damping": 1.5},
])
def test_sim_config_validation(kwargs):
    with pytest.raises(ConfigError):
        SimConfig(**kwargs)


def test_constraints_must_reference_existing_particles():
    system = ParticleSystem.from_positions(np.zeros((2, 3)))
    links = LinkBatch([0], [5], [1.0], [1.0])
    with pytest.raises(ConfigError):
        PBDSolver(system, ConstraintSet(links=links), SimConfig())


def test_negative_inverse_mass_is_rejected():
    with pytest.raises(ConfigError):
        ParticleSystem.from_positions(np.zeros((2, 3)), inv_mass=np.array([1.0, -1.0]))
