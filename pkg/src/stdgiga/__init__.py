"""Space-time discontinuous Galerkin isogeometric solver for the heat equation
on moving multipatch domains."""
from .assembly import DGParameters, SparseSystem, assemble_system, default_penalties, trace_ops
from .bspline import KnotVector, TensorBasis, eval_basis_derivs, greville_abscissae, open_knot_vector, refine_uniform
from .cases import ManufacturedProblem, case_moving_2d, case_moving_3d, case_unit_box, get_case
from .errors import ErrorReport, convergence_rates, dg_error, dg_norm, l2_error
from .exceptions import (
    ConfigError,
    ConstraintError,
    DomainError,
    GeometryError,
    SolverError,
    StdgigaError,
    TopologyError,
    UnsupportedConfigurationError,
)
from .geometry import Facet, FacetKind, GeometryMap, MultiPatchDomain, Patch, build_multipatch, jacobian, map_point
from .quadrature import QuadRule, element_rule, facet_rule, gauss_rule
from .solve import SolveReport, solve
from .study import StudyConfig, run_study, write_output, read_output

__version__ = "0.1.0"
