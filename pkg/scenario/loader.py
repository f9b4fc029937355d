"""
Scenario loading: YAML -> validated Scenario -> meshes, scene, rig, protocol.
"""
import logging
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import yaml
from pydantic import ValidationError

from calibration.experiment import InsertionProtocol
from calibration.params import StructureParamTable, StructureParams, load_structure_params
from exceptions import ConfigError
from geometry.mesh import TriangleMesh, load_mesh, make_box_mesh, make_ellipsoid_mesh
from scenario.schemas import MeshEntry, ProbeSpec, Scenario
from simulation.catheter import CatheterRig
from simulation.engine import SimConfig
from simulation.scene import Scene, build_scene

logger = logging.getLogger(__name__)


def _read_yaml(path: Path, what: str) -> dict:
    if not path.exists():
        raise ConfigError(f"{what} file not found: {path}")
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return data


def load_scenario(path: Union[str, Path]) -> Scenario:
    """
    Parse and validate a scenario file.

    Every referenced file must exist; relative paths resolve against the
    scenario's directory.
    """
    path = Path(path)
    data = _read_yaml(path, "scenario")
    try:
        scenario = Scenario.model_validate({**data, "base_dir": path.parent})
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e

    table_path = scenario.resolve(scenario.param_table)
    if not table_path.exists():
        raise ConfigError(f"{path}: param_table not found: {table_path}")
    for entry in scenario.meshes:
        if entry.path is not None and not scenario.resolve(entry.path).exists():
            raise ConfigError(f"{path}: mesh file for '{entry.structure}' not found: {scenario.resolve(entry.path)}")

    logger.info(f"Loaded scenario '{scenario.name}' from {path}")
    return scenario


def load_probe_spec(path: Union[str, Path]) -> ProbeSpec:
    path = Path(path)
    data = _read_yaml(path, "probe spec")
    try:
        return ProbeSpec.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e


def build_mesh(scenario: Scenario, entry: MeshEntry) -> TriangleMesh:
    if entry.path is not None:
        mesh = load_mesh(scenario.resolve(entry.path), units_scale=entry.units_scale, name=entry.structure)
        if any(entry.center):
            mesh = mesh.translated(entry.center)
        return mesh
    if entry.primitive == "box":
        dims = np.asarray(entry.dimensions) * entry.units_scale
        return make_box_mesh(dims, name=entry.structure).translated(entry.center)
    radii = np.asarray(entry.radii) * entry.units_scale
    return make_ellipsoid_mesh(radii, center=entry.center, name=entry.structure)


class ScenarioSetup:
    """A loaded scenario with its parameter table and meshes, ready to build scenes."""

    def __init__(self, scenario: Scenario, table: Optional[StructureParamTable] = None):
        self.scenario = scenario
        self.table = table or load_structure_params(scenario.resolve(scenario.param_table))
        for name in scenario.structure_names:
            self.table.get(name)
        self.meshes: List[TriangleMesh] = [build_mesh(scenario, e) for e in scenario.meshes]

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ScenarioSetup":
        return cls(load_scenario(path))

    def structure_params(self, table: Optional[StructureParamTable] = None) -> List[StructureParams]:
        table = table or self.table
        norm = self.scenario.region_norm
        out = []
        for name in self.scenario.structure_names:
            p = table.get(name)
            out.append(p.with_cluster(replace(p.cluster, region_norm=norm)))
        return out

    def scene(self, repeat: int = 0, table: Optional[StructureParamTable] = None) -> Scene:
        """Build the scene for one repeat; noise (if enabled) is seeded per repeat from the scenario seed."""
        noise = self.scenario.noise
        amplitude = noise.amplitude if noise.enabled else 0.0
        return build_scene(
            list(zip(self.meshes, self.structure_params(table))),
            pinned_faces=self.scenario.pinned_faces,
            noise_amplitude=amplitude,
            seed=self.scenario.seed + repeat * 1_000,
        )

    def rig(self) -> CatheterRig:
        r = self.scenario.rig
        return CatheterRig.create(r.radius, r.start_tip, r.direction, r.speed, r.shaft_length)

    def sim_config(self) -> SimConfig:
        s = self.scenario.sim
        return SimConfig(
            dt=s.dt,
            solver_iterations=s.solver_iterations,
            substeps=s.substeps,
            gravity=np.asarray(s.gravity, dtype=float),
            damping=s.damping,
        )

    def protocol(self, repeats: Optional[int] = None) -> InsertionProtocol:
        p = self.scenario.protocol
        return InsertionProtocol(
            depth_max=p.depth_max,
            sample_interval=p.sample_interval,
            measurement_depth=p.measurement_depth,
            slab_half_width=p.slab_half_width,
            repeats=repeats or p.repeats,
        )
