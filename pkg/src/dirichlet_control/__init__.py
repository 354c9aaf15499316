"""Dirichlet boundary control of the Poisson equation with P1 finite elements.

The package solves

    min  1/2 ||u - u_d||^2_{L2(O)} + alpha/2 ||q||^2_{L2(dO)}
    s.t. -Lap u = f in O,  u = q on dO,  q_a <= q <= q_b,

on convex prism domains O_w whose base polygon has one interior edge angle
w in [pi/2, pi), and provides a CLI that reproduces the known mesh-refinement
convergence behaviour of the control error.
"""

__version__ = "0.1.0"

from .assembly import (
    DofMap,
    assemble_boundary_load,
    assemble_load,
    assemble_mass_boundary,
    assemble_mass_domain,
    assemble_stiffness,
    integrate_l2_error_boundary,
    integrate_l2_error_domain,
    weighted_gradient_norm,
)
from .control import DiscreteProblem, ProblemData, boundary_projection
from .manufactured import ManufacturedCase, TheoryRates, exact_fields, expected_rate
from .mesh import (
    HalfSpaceDomain,
    Mesh,
    benchmark_domain,
    build_prism_mesh,
    distance_to_boundary,
    domain_volume,
    mesh_size,
    perturb_interior,
    refine_uniform,
    write_vtk,
)
from .optimize import (
    ActiveSet,
    OptimizationError,
    OptimizerConfig,
    OptimizeReport,
    Solution,
    optimality_residual,
    quasi_interpolate,
    solve,
    solve_pdas,
    solve_unconstrained,
    solve_variational,
)
from .quadrature import QuadratureRule, tet_rule, tri_rule
from .solver import DirichletSystem, SolveReport, SolverError, cg_solve, eliminate_dirichlet
from .study import (
    ConvergenceRecord,
    StudyConfig,
    compute_rates,
    read_csv,
    render_figure,
    run_study,
    write_csv,
)

__all__ = [
    "ActiveSet",
    "ConvergenceRecord",
    "DirichletSystem",
    "DiscreteProblem",
    "DofMap",
    "HalfSpaceDomain",
    "ManufacturedCase",
    "Mesh",
    "OptimizationError",
    "OptimizeReport",
    "OptimizerConfig",
    "ProblemData",
    "QuadratureRule",
    "Solution",
    "SolveReport",
    "SolverError",
    "StudyConfig",
    "TheoryRates",
    "assemble_boundary_load",
    "assemble_load",
    "assemble_mass_boundary",
    "assemble_mass_domain",
    "assemble_stiffness",
    "benchmark_domain",
    "boundary_projection",
    "build_prism_mesh",
    "cg_solve",
    "compute_rates",
    "distance_to_boundary",
    "domain_volume",
    "eliminate_dirichlet",
    "exact_fields",
    "expected_rate",
    "integrate_l2_error_boundary",
    "integrate_l2_error_domain",
    "mesh_size",
    "optimality_residual",
    "perturb_interior",
    "quasi_interpolate",
    "read_csv",
    "refine_uniform",
    "render_figure",
    "run_study",
    "solve",
    "solve_pdas",
    "solve_unconstrained",
    "solve_variational",
    "tet_rule",
    "tri_rule",
    "weighted_gradient_norm",
    "write_csv",
    "write_vtk",
]
