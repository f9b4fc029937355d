"""
Shared fixtures: a coarse box of tissue, a catheter that reaches its
particles, and a writer for throwaway scenario files.
"""
import copy
from pathlib import Path

import numpy as np
import pytest
import yaml

from calibration.params import StructureParams
from config import BoxFace, get_settings
from geometry.mesh import make_box_mesh
from simulation.catheter import CatheterRig
from simulation.scene import build_scene
from simulation.shape_match import ClusterParams

SMALL_BOX = (0.02, 0.01, 0.01)
SMALL_SPACING = 0.0025

PARAMS_CSV = (
    "# test tissue\n"
    "name,particle_spacing,cluster_spacing_radius,cluster_stiffness,link_radius,link_stiffness\n"
    "tissue,0.0025,0.005,0.5,0.005,0.001\n"
)

BASE_SCENARIO = {
    "name": "small_box",
    "meshes": [{"structure": "tissue", "primitive": "box", "dimensions": list(SMALL_BOX)}],
    "param_table": "params.csv",
    "rig": {
        "radius": 0.002,
        "start_tip": [-0.01, 0.0, 0.0],
        "direction": [1.0, 0.0, 0.0],
        "speed": 0.005,
        "shaft_length": 0.03,
    },
    "protocol": {
        "depth_max": 0.01,
        "sample_interval": 0.001,
        "measurement_depth": 0.005,
        "slab_half_width": 0.002,
    },
    "pinned_faces": ["x_max"],
    "calibration": {
        "structure": "tissue",
        "grid_resolution": 3,
        "cluster_spacing": [0.005, 0.005],
        "cluster_radius": [0.005, 0.005],
        "cluster_stiffness": [0.1, 0.9],
    },
}


def _merge(base: dict, overrides: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


@pytest.fixture(autouse=True)
def _fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tissue_params():
    return StructureParams(
        name="tissue",
        particle_spacing=SMALL_SPACING,
        cluster=ClusterParams(
            cluster_spacing=0.005,
            cluster_radius=0.005,
            cluster_stiffness=0.5,
            link_radius=0.005,
            link_stiffness=0.001,
        ),
    )


@pytest.fixture
def small_scene(tissue_params):
    """Factory for the 8 x 4 x 4 particle box, pinned at its far end."""

    def factory(k: int = 0, params: StructureParams = None, noise: float = 0.0):
        return build_scene(
            [(make_box_mesh(SMALL_BOX, name="tissue"), params or tissue_params)],
            pinned_faces=[BoxFace.X_MAX],
            noise_amplitude=noise,
            seed=100 + k,
        )

    return factory


@pytest.fixture
def small_rig():
    return CatheterRig.create(0.002, (-0.01, 0.0, 0.0), (1.0, 0.0, 0.0), 0.005, 0.03)


@pytest.fixture
def write_scenario(tmp_path):
    """Write params.csv and a scenario file into tmp_path; returns the scenario path."""

    def write(name: str = "small.scenario", **overrides) -> Path:
        (tmp_path / "params.csv").write_text(PARAMS_CSV)
        path = tmp_path / name
        path.write_text(yaml.safe_dump(_merge(BASE_SCENARIO, overrides), sort_keys=False))
        return path

    return write
