"""
Analysis module
Insertion metrics, curve mismatch and hole-perimeter probes
"""
from analysis.metrics import (
    penetration_depth,
    slab_average_displacement,
    com_displacement,
    Slab,
    InsertionFrame,
    InsertionRecord,
    DisplacementCurve,
    mismatch_score,
    average_records,
    structure_heatmap,
    mean_structure_displacement,
    RunMetrics,
)
from analysis.probes import ProbePointSet, make_probe_points, sample_hole_perimeter, compare_probe_fields

__all__ = [
    'penetration_depth',
    'slab_average_displacement',
    'com_displacement',
    'Slab',
    'InsertionFrame',
    'InsertionRecord',
    'DisplacementCurve',
    'mismatch_score',
    'average_records',
    'structure_heatmap',
    'mean_structure_displacement',
    'RunMetrics',
    'ProbePointSet',
    'make_probe_points',
    'sample_hole_perimeter',
    'compare_probe_fields',
]
