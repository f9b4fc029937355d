import pandas as pd
import pytest

import config
from calibration.params import (
    ParamSpace,
    StructureParamTable,
    load_structure_params,
    save_structure_params,
)
from exceptions import ConfigError
from simulation.shape_match import ClusterParams

STRUCTURES = config.SCENARIO_DIR / "params" / "brain_structures.csv"
HEADER = "name,particle_spacing,cluster_spacing_radius,cluster_stiffness,link_radius,link_stiffness\n"


def test_shipped_structure_table():
    table = load_structure_params(STRUCTURES)
    assert len(table) == 11
    assert table.get("gyri").cluster.cluster_stiffness == 0.002
    assert table.get("amygdala").cluster.cluster_stiffness == 0.0005
    thalamus = table.get("thalamus")
    assert thalamus.particle_spacing == 0.005
    assert thalamus.cluster.cluster_spacing == thalamus.cluster.cluster_radius == 0.005
    assert thalamus.cluster.link_stiffness == 0.001


def test_empty_table_raises(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ConfigError, match="empty"):
        load_structure_params(path)


def test_header_only_table_raises(tmp_path):
    path = tmp_path / "header.csv"
    path.write_text(HEADER)
    with pytest.raises(ConfigError, match="no rows"):
        load_structure_params(path)


def test_stiffness_above_one_raises(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(HEADER + "gyri,0.0066,0.0066,1.5,0.009,0.001\n")
    with pytest.raises(ConfigError, match="cluster_stiffness"):
        load_structure_params(path)


def test_missing_value_raises(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(HEADER + "gyri,0.0066,0.0066,,0.009,0.001\n")
    with pytest.raises(ConfigError, match="row 1"):
        load_structure_params(path)


def test_missing_column_raises(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("name,particle_spacing\ngyri,0.0066\n")
    with pytest.raises(ConfigError, match="missing columns"):
        load_structure_params(path)


def test_unknown_structure_raises():
    table = load_structure_params(STRUCTURES)
    with pytest.raises(ConfigError, match="no entry"):
        table.get("cortex")


def test_table_roundtrip(tmp_path):
    table = load_structure_params(STRUCTURES)
    back = load_structure_params(save_structure_params(table, tmp_path / "out.csv"))
    pd.testing.assert_frame_equal(back.to_dataframe(), table.to_dataframe())


def test_with_params_replaces_one_structure():
    table = load_structure_params(STRUCTURES)
    new = ClusterParams(0.01, 0.01, 0.3, 0.005, 0.001)
    updated = table.with_params("caudate", new)
    assert updated.get("caudate").cluster.cluster_stiffness == 0.3
    assert updated.get("putamen").cluster == table.get("putamen").cluster
    assert isinstance(updated, StructureParamTable)


# =============================================================================
# SEARCH SPACE
# =============================================================================

def test_grid_respects_coverage_rule():
    space = ParamSpace()
    grid = space.grid(4)
    assert grid
    assert all(p.cluster_radius >= p.cluster_spacing / 2.0 for p in grid)
    assert all(space.contains(p) for p in grid)
    assert len({p.key() for p in grid}) == len(grid)


def test_grid_of_fixed_space_is_one_point():
    params = ClusterParams(0.005, 0.005, 0.002, 0.005, 0.001)
    space = ParamSpace.around(params, vary=[])
    assert space.free_dimensions == []
    assert [p.key() for p in space.grid(5)] == [params.key()]


def test_around_varies_named_dimensions():
    params = ClusterParams(0.005, 0.005, 0.002, 0.005, 0.001)
    space = ParamSpace.around(params, vary=["cluster_stiffness"], cluster_stiffness=(0.0, 0.01))
    assert space.free_dimensions == ["cluster_stiffness"]
    assert [p.cluster_stiffness for p in space.grid(3)] == pytest.approx([0.0, 0.005, 0.01])


def test_clamp_raises_radius_to_half_spacing():
    space = ParamSpace()
    p = space.clamp({
        "cluster_spacing": 0.03, "cluster_radius": 0.003, "cluster_stiffness": 2.0,
        "link_radius": 0.005, "link_stiffness": 0.001,
    })
    assert p.cluster_radius == pytest.approx(0.015)
    assert p.cluster_stiffness == 1.0


def test_space_rejects_uncoverable_ranges():
    with pytest.raises(ConfigError):
        ParamSpace(cluster_spacing=(0.02, 0.03), cluster_radius=(0.001, 0.005))


def test_space_rejects_reversed_range():
    with pytest.raises(ConfigError):
        ParamSpace(cluster_stiffness=(0.5, 0.1))
