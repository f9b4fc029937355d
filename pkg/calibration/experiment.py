"""
Insertion Experiment Runner

Drives the catheter through a scene at constant speed and records the
displacement metrics every `sample_interval` of penetration depth.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

import config
from analysis.metrics import (
    InsertionFrame,
    InsertionRecord,
    Slab,
    average_records,
    com_displacement,
    penetration_depth,
    slab_average_displacement,
)
from config import get_settings
from exceptions import ConfigError, SimulationInstabilityError
from simulation.catheter import CatheterContact, CatheterRig, pose_at
from simulation.engine import PBDSolver, SimConfig
from simulation.scene import Scene

logger = logging.getLogger(__name__)


@dataclass
class InsertionProtocol:
    """How far to insert and where to measure."""
    depth_max: float
    sample_interval: float = config.SAMPLE_INTERVAL
    measurement_depth: float = config.MEASUREMENT_DEPTH
    slab_half_width: Optional[float] = None     # defaults to half the particle spacing
    repeats: int = 1

    def __post_init__(self):
        if not np.isfinite(self.depth_max) or self.depth_max < 0:
            raise ConfigError(f"depth_max must be >= 0, got {self.depth_max}")
        if self.sample_interval <= 0:
            raise ConfigError(f"sample_interval must be > 0, got {self.sample_interval}")
        if self.measurement_depth < 0:
            raise ConfigError(f"measurement_depth must be >= 0, got {self.measurement_depth}")
        if self.slab_half_width is not None and self.slab_half_width <= 0:
            raise ConfigError(f"slab_half_width must be > 0, got {self.slab_half_width}")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")


@dataclass
class ContactFrame:
    time: float
    depth: float
    contacts: int
    on_axis: int
    min_clearance: float


@dataclass
class RunDiagnostics:
    """Solver-side facts collected alongside an InsertionRecord."""
    step_times: List[float] = field(default_factory=list)
    contacts: List[ContactFrame] = field(default_factory=list)
    max_speed: float = 0.0
    min_clearance: float = float("inf")
    on_axis_contacts: int = 0
    degenerate_clusters: int = 0
    final_positions: Optional[np.ndarray] = None
    rest_positions: Optional[np.ndarray] = None

    @property
    def steps(self) -> int:
        return len(self.step_times)


class InsertionExperiment:
    """One constant-speed insertion into a scene."""

    def __init__(
        self,
        scene: Scene,
        rig: CatheterRig,
        protocol: InsertionProtocol,
        sim_config: Optional[SimConfig] = None,
        margin: float = 0.0,
        friction: float = 0.0,
    ):
        self.scene = scene
        self.rig = rig
        self.protocol = protocol
        self.sim_config = sim_config or SimConfig()
        self.settings = get_settings()

        self.contact = CatheterContact(rig, margin=margin, friction=friction)
        self.solver = PBDSolver(
            scene.system.copy(),
            scene.constraints.with_contact(self.contact),
            self.sim_config,
        )
        self.rest = scene.rest_positions
        half_width = protocol.slab_half_width or 0.5 * scene.particle_spacing
        self.slab = Slab(rig.start_tip, rig.direction, protocol.measurement_depth, half_width)
        self.subsets = scene.structure_indices()

        # State
        self.frames: List[InsertionFrame] = []
        self.diagnostics = RunDiagnostics(rest_positions=self.rest)

    def _check_feasible(self):
        """Reject protocols the rig cannot complete or the solver cannot resolve."""
        if self.protocol.depth_max > 0 and self.rig.speed == 0:
            raise ConfigError("catheter speed is 0 but depth_max > 0; the insertion would never finish")
        advance = self.rig.speed * self.sim_config.substep_dt
        if advance > self.rig.radius:
            raise SimulationInstabilityError(
                f"catheter advances {advance:.6g} m per substep, more than its radius {self.rig.radius:g} m; "
                f"contact would tunnel through particles (reduce dt or add substeps)",
                step=0,
                constraint="contact",
            )
        if len(self.slab.select(self.rest)) == 0:
            # Raises MeasurementError naming the slab
            slab_average_displacement(self.rest, self.rest, self.slab)
        if self.protocol.depth_max > 0:
            needed = self.protocol.depth_max / (self.rig.speed * self.sim_config.dt)
            if needed > self.settings.max_steps:
                raise ConfigError(
                    f"insertion needs ~{needed:.0f} steps, above SIM_MAX_STEPS={self.settings.max_steps}"
                )

    def _record_frame(self, time: float, depth: float):
        positions = self.solver.system.positions
        self.frames.append(InsertionFrame(
            time=time,
            depth=depth,
            slab_avg_disp=slab_average_displacement(positions, self.rest, self.slab),
            com_disp=com_displacement(positions, self.rest),
            per_structure_disp={
                name: com_displacement(positions, self.rest, idx) for name, idx in self.subsets.items()
            },
        ))
        f = self.frames[-1]
        logger.debug(f"t={time:.4f}s depth={depth:.6f} slab={f.slab_avg_disp:.6g} com={f.com_disp:.6g}")

    def _process_step(self) -> float:
        report = self.solver.step()
        t = self.solver.time
        depth = penetration_depth(self.rig.start_tip, pose_at(self.rig, t).tip)

        d = self.diagnostics
        d.step_times.append(report.wall_time)
        d.max_speed = max(d.max_speed, report.max_speed)
        d.on_axis_contacts += report.on_axis_contacts
        d.degenerate_clusters = max(d.degenerate_clusters, report.degenerate_clusters)

        gap = self.contact.clearance(self.solver.system.positions, self.solver.system.inv_mass, t)
        d.min_clearance = min(d.min_clearance, gap)
        if gap < -1e-9 and self.contact.friction == 0:
            logger.warning(f"step {self.solver.steps}: particle inside catheter by {-gap:.3g} m")
        d.contacts.append(ContactFrame(t, depth, report.contacts, report.on_axis_contacts, gap))
        return depth

    def run(self) -> InsertionRecord:
        """Run the insertion."""
        self._check_feasible()
        self._record_frame(0.0, 0.0)

        interval = self.protocol.sample_interval
        last_sample = 0
        depth = 0.0
        while depth < self.protocol.depth_max:
            if self.solver.steps >= self.settings.max_steps:
                raise SimulationInstabilityError(
                    f"insertion did not reach depth {self.protocol.depth_max:g} m within {self.settings.max_steps} steps",
                    step=self.solver.steps,
                )
            depth = self._process_step()
            sample = int(np.floor(depth / interval + 1e-9))
            if sample > last_sample or depth >= self.protocol.depth_max:
                last_sample = max(sample, last_sample)
                self._record_frame(self.solver.time, depth)

        d = self.diagnostics
        d.final_positions = self.solver.system.positions.copy()
        speed_limit = self.settings.speed_sentinel_factor * self.rig.speed
        if self.rig.speed > 0 and d.max_speed > speed_limit:
            logger.warning(
                f"max particle speed {d.max_speed:.3g} m/s exceeds {self.settings.speed_sentinel_factor:g}x "
                f"catheter speed"
            )
        if d.on_axis_contacts:
            logger.warning(f"{d.on_axis_contacts} on-axis contact(s) resolved along a fixed perpendicular")
        if d.degenerate_clusters:
            logger.warning(f"up to {d.degenerate_clusters} degenerate cluster(s) per step used identity rotation")

        record = InsertionRecord(self.frames, self.scene.structure_names, diagnostics=d)
        record.validate()
        logger.info(
            f"Insertion done: {self.solver.steps} steps, {len(self.frames)} frames, "
            f"final depth {record.last.depth:.6f} m, slab {record.last.slab_avg_disp:.6g} m"
        )
        return record


def run_insertion_experiment(
    scene: Scene,
    rig: CatheterRig,
    protocol: InsertionProtocol,
    sim_config: Optional[SimConfig] = None,
    margin: float = 0.0,
    friction: float = 0.0,
    params: Optional[dict] = None,
) -> InsertionRecord:
    """
    Insert the catheter up to protocol.depth_max, sampling metrics by depth.

    Instability errors are re-raised with `params` attached when given.
    """
    try:
        return InsertionExperiment(scene, rig, protocol, sim_config, margin, friction).run()
    except SimulationInstabilityError as e:
        if params is not None:
            raise e.with_params(params) from e
        raise


def run_insertion_series(
    scene_factory: Callable[[int], Scene],
    rig: CatheterRig,
    protocol: InsertionProtocol,
    sim_config: Optional[SimConfig] = None,
    margin: float = 0.0,
    friction: float = 0.0,
    params: Optional[dict] = None,
) -> List[InsertionRecord]:
    """
    Repeat the insertion protocol.repeats times on freshly built scenes.

    scene_factory(k) builds the scene for repeat k (noise seeds differ per k).
    """
    records = []
    for k in range(protocol.repeats):
        scene = scene_factory(k)
        records.append(run_insertion_experiment(scene, rig, protocol, sim_config, margin, friction, params))
        logger.info(f"Insertion {k + 1}/{protocol.repeats} complete")
    return records


def averaged_insertion(
    scene_factory: Callable[[int], Scene],
    rig: CatheterRig,
    protocol: InsertionProtocol,
    sim_config: Optional[SimConfig] = None,
    margin: float = 0.0,
    friction: float = 0.0,
    params: Optional[dict] = None,
) -> InsertionRecord:
    """Frame-wise mean of a repeated insertion series."""
    return average_records(run_insertion_series(scene_factory, rig, protocol, sim_config, margin, friction, params))
