"""Stabilized finite elements for the Reynolds equation with cavitation."""
from .mesh import QuadratureRule, StructuredMesh, build_mesh, gauss_rule, refine, refinement_series
from .model import ModelConfig
from .solver import IterationTrace, SolverConfig, estimate_rate, solve_nonlinear
from .verification import bearing_case_config, convergence_study, error_l2, get_case

__version__ = "0.1.0"

__all__ = [
    "IterationTrace",
    "ModelConfig",
    "QuadratureRule",
    "SolverConfig",
    "StructuredMesh",
    "bearing_case_config",
    "build_mesh",
    "convergence_study",
    "error_l2",
    "estimate_rate",
    "gauss_rule",
    "get_case",
    "refine",
    "refinement_series",
    "solve_nonlinear",
]
