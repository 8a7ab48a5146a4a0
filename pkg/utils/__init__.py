# Utils Package
"""
Problem definitions, error metrics and run configuration.
"""

from utils.problems import (
    Experiment, ManufacturedSolution, cavity_problem, get_problem,
    linear_transmission_manufactured, metamaterial_problem,
)
from utils.metrics import (
    ConvergenceTable, ErrorReport, MetricsError, compute_errors, compute_rates, flux_jump_residual,
)
from utils.run_config import ConfigError, RunConfig, load_config
