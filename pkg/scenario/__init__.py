"""
Scenario files: schemas and loading
"""
from scenario.schemas import Scenario, MeshEntry, ProbeSpec
from scenario.loader import ScenarioSetup, load_scenario, load_probe_spec

__all__ = ['Scenario', 'MeshEntry', 'ProbeSpec', 'ScenarioSetup', 'load_scenario', 'load_probe_spec']
