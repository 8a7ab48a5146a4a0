# Experiments Package
"""
Drivers for convergence studies, field output and mesh export.
"""

from experiments.study import (
    StudyResult, FieldOutput, export_mesh, list_experiments, run_convergence_study,
    run_field_output, slice_discrepancy,
)
