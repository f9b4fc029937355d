"""
Report files and reference data
"""
from data.reports import (
    write_record, read_record, write_contacts, read_contacts, write_field, write_heatmap, read_heatmap,
    write_summary, read_summary, write_trace, read_trace, write_validation, read_validation,
)
from data.reference import load_reference_curve, load_reference_field

__all__ = [
    'write_record', 'read_record', 'write_contacts', 'read_contacts', 'write_field', 'write_heatmap', 'read_heatmap',
    'write_summary', 'read_summary', 'write_trace', 'read_trace', 'write_validation', 'read_validation',
    'load_reference_curve', 'load_reference_field',
]
