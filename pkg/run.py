#!/usr/bin/env python3
"""
PBD Brain-Tissue Simulator - Main Entry Point

Usage:
    python run.py run scenarios/phantom.scenario --out out/phantom
    python run.py calibrate scenarios/phantom.scenario --ref scenarios/reference/white_matter_placeholder.csv --budget 40 --out out/cal
    python run.py validate scenarios/ovine_synthetic.scenario --probes scenarios/probes/ovine.probes --field out/ovine/field.csv --out out/val
"""
import sys

from cli.main import main

if __name__ == "__main__":
    sys.exit(main())
