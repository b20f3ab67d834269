"""Discrete Clifford analysis for Vekua-type equations on grid boxes."""

__version__ = "0.1.0"

from .clifford import Multivector, blade_table, conjugate, mv_multiply, nonscalar_part, scalar_part
from .domain import Field, GridDomain, scalar_product, test_function_basis
from .factorization import PotentialSpec, factorization_residual
from .hodge import VekuaSpaces, hodge_split, monogenic_basis, project_vekua, vekua_basis
from .kernels import kernel_eval, kernel_projection
from .operators import dirac_apply, teodorescu_apply
from .vekua import VekuaProblem, make_vekua_solution, s_apply, s_inverse_apply, vekua_residual

__all__ = [
    "Field", "GridDomain", "Multivector", "PotentialSpec", "VekuaProblem", "VekuaSpaces",
    "blade_table", "conjugate", "dirac_apply", "factorization_residual", "hodge_split",
    "kernel_eval", "kernel_projection", "make_vekua_solution", "monogenic_basis", "mv_multiply",
    "nonscalar_part", "project_vekua", "s_apply", "s_inverse_apply", "scalar_part", "scalar_product",
    "teodorescu_apply", "test_function_basis", "vekua_basis", "vekua_residual",
]
