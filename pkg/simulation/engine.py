"""
Position-based dynamics solver.

Each substep: predict positions from velocities and gravity, run a fixed
number of constraint iterations (shape matching, links, catheter contact),
then derive velocities from the position change and apply damping.
"""
import logging
import time as _time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

import config
from exceptions import ConfigError, SimulationInstabilityError
from simulation.constraints import ConstraintSet

logger = logging.getLogger(__name__)


@dataclass
class SimConfig:
    dt: float = config.DEFAULT_DT
    solver_iterations: int = config.DEFAULT_SOLVER_ITERATIONS
    substeps: int = config.DEFAULT_SUBSTEPS
    gravity: np.ndarray = field(default_factory=lambda: np.array(config.DEFAULT_GRAVITY, dtype=float))
    damping: float = config.DEFAULT_DAMPING

    def __post_init__(self):
        self.gravity = np.asarray(self.gravity, dtype=float).reshape(3)
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.solver_iterations < 1:
            raise ConfigError(f"solver_iterations must be >= 1, got {self.solver_iterations}")
        if self.substeps < 1:
            raise ConfigError(f"substeps must be >= 1, got {self.substeps}")
        if not (0.0 <= self.damping <= 1.0):
            raise ConfigError(f"damping must be within [0, 1], got {self.damping}")

    @property
    def substep_dt(self) -> float:
        return self.dt / self.substeps


@dataclass
class ParticleSystem:
    """Particle state. inv_mass == 0 marks a pinned particle."""
    positions: np.ndarray
    velocities: np.ndarray
    inv_mass: np.ndarray
    predicted: np.ndarray = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.velocities = np.asarray(self.velocities, dtype=float).reshape(-1, 3)
        self.inv_mass = np.asarray(self.inv_mass, dtype=float).reshape(-1)
        if self.predicted is None:
            self.predicted = self.positions.copy()
        self.validate()

    @classmethod
    def from_positions(cls, positions: np.ndarray, inv_mass: Optional[np.ndarray] = None) -> "ParticleSystem":
        positions = np.array(positions, dtype=float).reshape(-1, 3)
        if inv_mass is None:
            inv_mass = np.ones(len(positions))
        return cls(positions=positions, velocities=np.zeros_like(positions), inv_mass=inv_mass)

    def validate(self) -> None:
        n = len(self.positions)
        if self.velocities.shape != (n, 3) or self.inv_mass.shape != (n,) or self.predicted.shape != (n, 3):
            raise ConfigError("particle arrays differ in length")
        if np.any(self.inv_mass < 0):
            raise ConfigError("inverse masses must be >= 0")

    @property
    def count(self) -> int:
        return len(self.positions)

    @property
    def free(self) -> np.ndarray:
        return self.inv_mass > 0

    def momentum(self) -> np.ndarray:
        """Total momentum of free particles."""
        free = self.free
        return (self.velocities[free] / self.inv_mass[free, None]).sum(axis=0)

    def pin(self, indices: Sequence[int]) -> None:
        idx = np.asarray(indices, dtype=np.int64)
        self.inv_mass[idx] = 0.0
        self.velocities[idx] = 0.0

    def copy(self) -> "ParticleSystem":
        return ParticleSystem(
            positions=self.positions.copy(),
            velocities=self.velocities.copy(),
            inv_mass=self.inv_mass.copy(),
            predicted=self.predicted.copy(),
        )


@dataclass
class StepReport:
    """Diagnostics of one solver step."""
    max_position_delta: float
    link_residuals: List[float]
    shape_residuals: List[float] = field(default_factory=list)
    contact_clearance: float = float("inf")
    contacts: int = 0
    on_axis_contacts: int = 0
    degenerate_clusters: int = 0
    max_speed: float = 0.0
    wall_time: float = 0.0

    @property
    def link_residual(self) -> float:
        return self.link_residuals[-1] if self.link_residuals else 0.0

    @property
    def shape_residual(self) -> float:
        return self.shape_residuals[-1] if self.shape_residuals else 0.0

    @property
    def penetration(self) -> float:
        """Deepest free particle inside the catheter at the end of the step (0 when clear)."""
        return max(0.0, -self.contact_clearance)


def _check_finite(predicted: np.ndarray, step_index: Optional[int], constraint: str) -> None:
    finite = np.isfinite(predicted).all(axis=1)
    if not finite.all():
        particle = int(np.nonzero(~finite)[0][0])
        raise SimulationInstabilityError(
            "non-finite particle state",
            step=step_index,
            particle=particle,
            constraint=constraint,
        )


def step(
    system: ParticleSystem,
    constraints: ConstraintSet,
    sim_config: SimConfig,
    time: float = 0.0,
    step_index: Optional[int] = None,
) -> StepReport:
    """
    Advance the system by one frame of sim_config.dt, in place.

    Args:
        system: particle state
        constraints: clusters, links and contacts
        sim_config: dt, iterations, substeps, gravity, damping
        time: simulation time at the start of the frame
        step_index: frame number used in error reports

    Returns:
        StepReport
    """
    started = _time.perf_counter()
    n_iter = sim_config.solver_iterations
    h = sim_config.substep_dt
    free = system.free
    start_positions = system.positions.copy()

    contacts = 0
    on_axis = 0
    degenerate = 0
    link_residuals: List[float] = []
    shape_residuals: List[float] = []

    for sub in range(sim_config.substeps):
        sub_time = time + (sub + 1) * h
        v = system.velocities
        v[free] += h * sim_config.gravity
        system.predicted[:] = system.positions
        system.predicted[free] += h * v[free]
        _check_finite(system.predicted, step_index, "prediction")

        track = sub == sim_config.substeps - 1
        for _ in range(n_iter):
            if constraints.clusters is not None and len(constraints.clusters):
                _, bad = constraints.clusters.project(system.predicted, system.inv_mass, n_iter)
                degenerate = max(degenerate, bad)
                if track:
                    shape_residuals.append(constraints.clusters.last_residual)
                _check_finite(system.predicted, step_index, "shape_matching")
            if constraints.links is not None and len(constraints.links):
                if track:
                    link_residuals.append(constraints.links.residual(system.predicted))
                constraints.links.project(system.predicted, system.inv_mass, n_iter)
                _check_finite(system.predicted, step_index, "links")
            for contact in constraints.contacts:
                result = contact.project(system.predicted, system.inv_mass, sub_time, h)
                contacts = max(contacts, result.count)
                on_axis += result.on_axis
                _check_finite(system.predicted, step_index, "contact")
        if track and constraints.links is not None and len(constraints.links):
            link_residuals.append(constraints.links.residual(system.predicted))

        system.velocities[free] = (system.predicted[free] - system.positions[free]) / h
        system.velocities[free] *= 1.0 - sim_config.damping
        system.velocities[~free] = 0.0
        system.positions[free] = system.predicted[free]

    gap = min(
        (contact.clearance(system.positions, system.inv_mass, sub_time) for contact in constraints.contacts),
        default=float("inf"),
    )
    speeds = np.linalg.norm(system.velocities, axis=1)
    report = StepReport(
        max_position_delta=float(np.abs(system.positions - start_positions).max()) if system.count else 0.0,
        link_residuals=link_residuals,
        shape_residuals=shape_residuals,
        contact_clearance=gap,
        contacts=contacts,
        on_axis_contacts=on_axis,
        degenerate_clusters=degenerate,
        max_speed=float(speeds.max()) if system.count else 0.0,
        wall_time=_time.perf_counter() - started,
    )
    if on_axis:
        logger.debug(f"step {step_index}: {on_axis} on-axis contact(s) pushed along a fixed perpendicular")
    return report


class PBDSolver:
    """Steps a particle system through time against a fixed constraint set."""

    def __init__(self, system: ParticleSystem, constraints: ConstraintSet, sim_config: SimConfig):
        constraints.validate(system.count)
        self.system = system
        self.constraints = constraints
        self.config = sim_config
        self.time = 0.0
        self.steps = 0

    def step(self) -> StepReport:
        report = step(self.system, self.constraints, self.config, time=self.time, step_index=self.steps)
        self.steps += 1
        # Recomputed from the step count, never accumulated
        self.time = self.steps * self.config.dt
        return report

    def run(self, n_steps: int) -> List[StepReport]:
        return [self.step() for _ in range(n_steps)]
