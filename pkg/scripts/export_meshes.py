"""
Mesh Export Script

Writes the primitive meshes used by the shipped scenarios as OBJ files so they
can be inspected or replaced with segmented anatomy.

Usage:
    python -m scripts.export_meshes
    python -m scripts.export_meshes --out scenarios/meshes --units mm
"""
import argparse
import os
import sys

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import config
from geometry.mesh import make_box_mesh, save_mesh
from scenario.loader import build_mesh, load_scenario

UNITS = {"m": 1.0, "mm": 0.001}


def export_phantom(out_dir: str, units: str) -> str:
    mesh = make_box_mesh(config.PHANTOM_DIMENSIONS, name="phantom_box")
    path = save_mesh(mesh, os.path.join(out_dir, "phantom_box.obj"), units_scale=UNITS[units])
    print(f"   ✓ {path}")
    return str(path)


def export_scenario(scenario_path: str, out_dir: str, units: str):
    scenario = load_scenario(scenario_path)
    for entry in scenario.meshes:
        if entry.primitive is None:
            continue
        mesh = build_mesh(scenario, entry)
        path = save_mesh(mesh, os.path.join(out_dir, f"{entry.structure}.obj"), units_scale=UNITS[units])
        print(f"   ✓ {path} ({len(mesh.vertices)} vertices, {len(mesh.triangles)} triangles)")


def main():
    parser = argparse.ArgumentParser(description="Export scenario meshes to OBJ")
    parser.add_argument("--out", default=str(config.SCENARIO_DIR / "meshes"), help="Output directory")
    parser.add_argument("--units", choices=sorted(UNITS), default="mm", help="File units")
    parser.add_argument("--scenarios", nargs="*", default=[
        str(config.SCENARIO_DIR / "brain_synthetic.scenario"),
        str(config.SCENARIO_DIR / "ovine_synthetic.scenario"),
    ])
    args = parser.parse_args()

    print("=" * 60)
    print(f"Exporting meshes to {args.out} ({args.units})")
    print("=" * 60)
    export_phantom(args.out, args.units)
    for path in args.scenarios:
        export_scenario(path, args.out, args.units)


if __name__ == "__main__":
    main()
