"""Optimal control of the obstacle problem: solvers, stationarity systems,
second-order certificates and closed-form non-optimality scenarios."""

from .grid import (Grid, GridFn, GridError, INTERVAL_1D, RADIAL_DISC,
                   SQUARE_2D, constant, from_callable, inner, laplacian,
                   norm_l1, norm_l2, norm_linf, poincare_constant,
                   poisson_solve)
from .vi import (ControlBounds, ObstacleSolution, SolverError, TOL_ACT,
                 TOL_KKT, comparison_check, lipschitz_l1_check, solve_obstacle)
from .sensitivity import directional_derivative
from .stationarity import (ObjectiveSpec, StationarityBundle,
                           StationarityReport, TOL_STAT, assemble_bundle,
                           aux_identities_check, bouligand_gap,
                           check_strong_stationarity, taylor_gap_identity)
from .structure import (double_complementarity_residual,
                        energy_inequality_check, partially_optimal_control,
                        partially_optimal_multiplier, reformulated_objective,
                        roundtrip_state)
from .ssc import (SscReport, certify_compat_global, certify_compat_local,
                  certify_enhanced_global, certify_enhanced_local,
                  certify_subharmonic_convex, classify_subharmonic)
from .optimize import OptimizeResult, solve_general, solve_subharmonic
from . import counterexamples

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
