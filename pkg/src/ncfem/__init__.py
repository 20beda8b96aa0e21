"""Nonconforming box elements for quad-curl and Brinkman problems, with complex audits."""

from .assembly import FormSpec, assemble, assemble_brinkman, assemble_quadcurl, local_matrix
from .bench import ExactSolution, ErrorRecord, RunConfig, compute_errors, eoc, run
from .complexcheck import check_commuting, check_exactness
from .errors import (
    ComplexStructureError,
    ContractViolation,
    IterationLimitError,
    NumericalDegeneracyError,
    SingularityError,
    UnisolvenceError,
)
from .linsolve import solve_sym_indef
from .mesh import build_box_mesh, global_dofs, unit_cube_mesh
from .polyspace import Box3, build_space, dimension_formula
from .refelem import element, local_interpolate

__version__ = "0.1.0"

__all__ = [
    "Box3", "ComplexStructureError", "ContractViolation", "ErrorRecord", "ExactSolution",
    "FormSpec", "IterationLimitError", "NumericalDegeneracyError", "RunConfig",
    "SingularityError", "UnisolvenceError", "assemble", "assemble_brinkman", "assemble_quadcurl",
    "build_box_mesh", "build_space", "check_commuting", "check_exactness", "compute_errors",
    "dimension_formula", "element", "eoc", "global_dofs", "local_interpolate", "local_matrix",
    "run", "solve_sym_indef", "unit_cube_mesh",
]
