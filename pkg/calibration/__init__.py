"""
Calibration Module
Insertion experiments, structure parameter tables and parameter search
"""
from .params import ParamSpace, StructureParams, StructureParamTable, load_structure_params, save_structure_params
from .experiment import InsertionProtocol, run_insertion_experiment, run_insertion_series, averaged_insertion
from .search import calibrate, CalibrationResult, ScenarioObjective

__all__ = [
    'ParamSpace', 'StructureParams', 'StructureParamTable', 'load_structure_params', 'save_structure_params',
    'InsertionProtocol', 'run_insertion_experiment', 'run_insertion_series', 'averaged_insertion',
    'calibrate', 'CalibrationResult', 'ScenarioObjective',
]
