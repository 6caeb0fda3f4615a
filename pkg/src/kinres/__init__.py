"""Quantum kinetic expansion of two-site donor-acceptor transfer.

Rate kernels of the population master equation in even powers of the
electronic coupling, continued-fraction resummation of the Laplace-domain
rates, population dynamics by contour inversion, and a hierarchy
reference propagator for validation.
"""

from .bath import (DebyeBath, LineshapeEvaluator, LineshapeMode,
                   correlation_modes, lineshape_by_quadrature)
from .config import RunConfig, SweepGrid, load_config, validate_report
from .dynamics import (InversionSpec, PopulationTrajectory, Provenance,
                       equilibrium_population, invert_laplace,
                       population_trajectory, solve_volterra_order2)
from .errors import (DegenerateDenominator, DomainError, InversionUnstable,
                     KinresError, NonConvergent, NonPositiveRate,
                     NotConverged, NumericalError, PlateauNotReached,
                     PoorFit, SingularMatrix, ValidationError,
                     ZeroConvergent)
from .figures import FIGURE_IDS, run_figure
from .heom import (HeomConfig, HierarchyState, fit_exact_rate,
                   heom_equilibrium, heom_propagate)
from .kernels import Direction, SystemSpec, k2, k4, k6, kernel_matrix
from .quadrature import (KernelTable, LaplaceRate, QuadMethod, QuadSpec,
                         laplace_rate, normalized_rate_curve)
from .resummation import (CfCoefficients, ResummedRate, cf_coefficients,
                          cf_resum, matrix_pade, series_consistency)
from .units import CM1_TO_RADFS, KB_CM1_PER_K, thermal_beta_fs

__all__ = [
    "CM1_TO_RADFS", "KB_CM1_PER_K", "thermal_beta_fs",
    "CfCoefficients", "DebyeBath", "Direction", "DegenerateDenominator",
    "DomainError", "FIGURE_IDS", "HeomConfig", "HierarchyState",
    "InversionSpec", "InversionUnstable", "KernelTable", "KinresError",
    "LaplaceRate", "LineshapeEvaluator", "LineshapeMode", "NonConvergent",
    "NonPositiveRate", "NotConverged", "NumericalError", "PlateauNotReached",
    "PoorFit", "PopulationTrajectory", "Provenance", "QuadMethod",
    "QuadSpec", "ResummedRate", "RunConfig", "SingularMatrix", "SweepGrid",
    "SystemSpec", "ValidationError", "ZeroConvergent", "cf_coefficients",
    "cf_resum", "correlation_modes", "equilibrium_population",
    "fit_exact_rate", "heom_equilibrium", "heom_propagate", "invert_laplace",
    "k2", "k4", "k6", "kernel_matrix", "laplace_rate",
    "lineshape_by_quadrature", "load_config", "matrix_pade",
    "normalized_rate_curve", "population_trajectory", "run_figure",
    "series_consistency", "solve_volterra_order2", "validate_report",
]
