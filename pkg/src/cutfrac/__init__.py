"""Unfitted (cut) finite elements for Darcy flow with embedded fracture networks."""

from .analysis import (
    ConvergenceReport,
    compute_errors,
    cut_robustness_sweep,
    fit_rate,
    residual_oracle,
    run_convergence,
    solve_case,
)
from .assembly import NEUMANN, Dirichlet, LinearSystem, ModelSpec, apply_boundary_conditions, assemble_system
from .cases import ManufacturedCase, case_example1, case_example2, case_example3
from .errors import *  # noqa: F401,F403
from .cases import case_patch
from .geometry import Edge, FractureGraph, build_fracture_graph, classify_point, intersect_triangle
from .mesh import Mesh, build_structured_mesh, compute_cut_topology
from .solver import SolveReport, estimate_condition, solve
from .spaces import DofSpace, SolutionField, build_dof_space, evaluate_solution

__version__ = "0.1.0"

__all__ = [
    "ConvergenceReport", "compute_errors", "cut_robustness_sweep", "fit_rate", "residual_oracle",
    "run_convergence", "solve_case", "NEUMANN", "Dirichlet", "LinearSystem", "ModelSpec",
    "apply_boundary_conditions", "assemble_system", "ManufacturedCase", "case_example1", "case_example2",
    "case_example3", "case_patch", "Edge", "FractureGraph", "build_fracture_graph", "classify_point",
    "intersect_triangle", "Mesh", "build_structured_mesh", "compute_cut_topology", "SolveReport",
    "estimate_condition", "solve", "DofSpace", "SolutionField", "build_dof_space", "evaluate_solution",
]
