"""
CLI commands. Each returns a process exit code:
0 success, 1 configuration/input error, 2 numerical instability.
"""
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from analysis.metrics import RunMetrics, average_records, mean_structure_displacement, structure_heatmap
from analysis.probes import compare_probe_fields, sample_hole_perimeter
from calibration.experiment import run_insertion_experiment, run_insertion_series
from calibration.params import ParamSpace, save_structure_params
from calibration.search import ScenarioObjective, calibrate
from config import ExitCode
from data.reference import load_reference_curve, load_reference_field
from data.reports import (
    write_contacts,
    write_field,
    write_heatmap,
    write_record,
    write_summary,
    write_trace,
    write_validation,
)
from exceptions import CalibrationError, ConfigError, SimulationInstabilityError
from scenario.loader import ScenarioSetup, load_probe_spec

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

PathLike = Union[str, Path]


@contextmanager
def _log_to(out_dir: Path):
    """Mirror all log records into out_dir/sim.log for the duration of a command."""
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out_dir / "sim.log", mode="w")
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger()
    root.addHandler(handler)
    try:
        yield
    finally:
        root.removeHandler(handler)
        handler.close()


def _guarded(command: str, body: Callable[[], None]) -> int:
    """Run a command body, turning library errors into exit codes."""
    try:
        body()
        return int(ExitCode.OK)
    except (ConfigError, ValidationError, FileNotFoundError) as e:
        logger.error(f"{command}: configuration error: {e}")
        print(f"✗ Configuration error: {e}", file=sys.stderr)
        return int(ExitCode.CONFIG_ERROR)
    except (SimulationInstabilityError, CalibrationError) as e:
        logger.error(f"{command}: {type(e).__name__}: {e}")
        print(f"✗ {type(e).__name__}: {e}", file=sys.stderr)
        return int(ExitCode.INSTABILITY)


# =============================================================================
# RUN
# =============================================================================

def cmd_run(scenario_path: PathLike, out_dir: PathLike, repeats: Optional[int] = None) -> int:
    """Run a scenario's insertion; several structures also get a depth x structure heatmap.csv."""
    out_dir = Path(out_dir)

    def body():
        setup = ScenarioSetup.from_file(scenario_path)
        scenario = setup.scenario
        rig = setup.rig()
        protocol = setup.protocol(repeats)
        scenes = []

        def factory(k: int):
            scenes.append(setup.scene(k))
            return scenes[-1]

        print(f"▶ {scenario.name}: inserting to {protocol.depth_max * 1000:.2f} mm x{protocol.repeats}")
        records = run_insertion_series(
            factory, rig, protocol, setup.sim_config(), scenario.rig.margin, scenario.rig.friction,
        )
        record = average_records(records)
        diag = records[0].diagnostics

        write_record(record, out_dir / "record.csv")
        write_contacts(diag.contacts, out_dir / "contacts.csv")
        write_field(diag.rest_positions, diag.final_positions, out_dir / "field.csv")
        if len(record.structure_names) > 1:
            write_heatmap(structure_heatmap(records), out_dir / "heatmap.csv")

        metrics = RunMetrics(
            record,
            step_times=[t for r in records for t in r.diagnostics.step_times],
            max_speed=max(r.diagnostics.max_speed for r in records),
            catheter_speed=rig.speed,
            min_clearance=min(r.diagnostics.min_clearance for r in records),
            on_axis_contacts=sum(r.diagnostics.on_axis_contacts for r in records),
        )
        scene = scenes[0]
        summary = {
            'scenario': scenario.name,
            'particles': scene.system.count,
            'pinned': scene.pinned_count,
            'clusters': scene.constraints.num_clusters,
            'links': scene.constraints.num_links,
            'structures': scene.structure_names,
            'repeats': protocol.repeats,
            'seed': scenario.seed,
            'noise': scenario.noise.enabled,
            **metrics.to_dict(),
            'mean_structure_disp': mean_structure_displacement(records),
        }
        write_summary(summary, out_dir / "summary.json")

        print(f"✓ depth {metrics.final_depth * 1000:.3f} mm, "
              f"slab displacement {metrics.final_slab_avg_disp * 1000:.4f} mm, "
              f"CoM displacement {metrics.final_com_disp * 1000:.4f} mm")
        print(f"  step latency mean {metrics.step_mean_ms:.3f} ms, p95 {metrics.step_p95_ms:.3f} ms")
        print(f"  outputs in {out_dir}")

    with _log_to(out_dir):
        return _guarded("run", body)


# =============================================================================
# CALIBRATE
# =============================================================================

def cmd_calibrate(scenario_path: PathLike, reference_csv: PathLike, budget: int, out_dir: PathLike) -> int:
    """Fit one structure's cluster parameters to a reference curve; writes trace.csv and best_params.csv."""
    out_dir = Path(out_dir)

    def body():
        if budget < 1:
            raise ConfigError(f"budget must be >= 1, got {budget}")
        setup = ScenarioSetup.from_file(scenario_path)
        reference = load_reference_curve(reference_csv)
        section = setup.scenario.calibration
        structure = setup.scenario.calibration_structure
        base = setup.table.get(structure).cluster

        space = ParamSpace(
            cluster_spacing=section.cluster_spacing,
            cluster_radius=section.cluster_radius,
            cluster_stiffness=section.cluster_stiffness,
            link_radius=section.link_radius or (base.link_radius, base.link_radius),
            link_stiffness=section.link_stiffness or (base.link_stiffness, base.link_stiffness),
        )
        print(f"▶ Calibrating '{structure}' in {setup.scenario.name}, budget {budget}")
        result = calibrate(space, ScenarioObjective(setup, reference, structure), budget, section.grid_resolution)

        write_trace(result.trace_dataframe(), out_dir / "trace.csv")
        best = pd.DataFrame([{'name': structure, 'particle_spacing': setup.table.get(structure).particle_spacing,
                              **result.best.to_dict(), 'score': result.score}])
        best.to_csv(out_dir / "best_params.csv", index=False, float_format="%.17g")
        if np.isclose(result.best.cluster_spacing, result.best.cluster_radius, rtol=0, atol=1e-15):
            save_structure_params(setup.table.with_params(structure, result.best), out_dir / "params_table.csv")

        print(f"✓ best score {result.score:.4f}% after {len(result.trace)} evaluations")
        for name, value in result.best.to_dict().items():
            print(f"  {name}: {value:.6g}")

    with _log_to(out_dir):
        return _guarded("calibrate", body)


# =============================================================================
# VALIDATE
# =============================================================================

def cmd_validate(scenario_path: PathLike, probe_spec: PathLike, reference_field_csv: PathLike,
                 out_dir: PathLike) -> int:
    """Compare hole-perimeter probe displacements with a reference field; writes validation.csv."""
    out_dir = Path(out_dir)

    def body():
        setup = ScenarioSetup.from_file(scenario_path)
        spec = load_probe_spec(probe_spec)
        points, displacements = load_reference_field(reference_field_csv)
        rig = setup.rig()
        scene = setup.scene(0)

        print(f"▶ Validating {setup.scenario.name} against {Path(reference_field_csv).name}")
        record = run_insertion_experiment(
            scene, rig, setup.protocol(1), setup.sim_config(), setup.scenario.rig.margin, setup.scenario.rig.friction,
        )
        diag = record.diagnostics
        sample = sample_hole_perimeter(
            spec.origin if spec.origin is not None else rig.start_tip,
            spec.direction if spec.direction is not None else rig.direction,
            spec.hole_radius or rig.radius,
            spec.depth_range,
            diag.rest_positions,
            diag.final_positions,
            scene.particle_spacing,
        )
        comparison = compare_probe_fields(
            sample, points, displacements, spec.max_distance_factor * scene.particle_spacing,
        )
        write_validation(comparison.to_dataframe(sample), out_dir / "validation.csv")

        print(f"✓ mismatch {comparison.mismatch_pct:.4f}% over {len(sample.probes)} probes "
              f"(mean probe displacement {sample.mean_displacement * 1000:.4f} mm)")

    with _log_to(out_dir):
        return _guarded("validate", body)
