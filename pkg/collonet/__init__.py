"""
Collocation Network Solver

A Python library for solving Dirichlet problems of linear PDEs on boundaries
given as point clouds. The trial solution adds a Gaussian RBF layer to a
sigmoidal perceptron so that the boundary values hold exactly.
"""

from .solver import CollocationSolver
from .optim import TrainConfig, bfgs_minimize, two_phase_train
from .pde_core import ProblemSpec, TrialSolution, penalty_error, synergy_error
from .problems import catalog, get_case, load_problem_file
from .exceptions import (
    CollonetError,
    DegenerateGeometryError,
    InvalidArgumentError,
    SingularMatrixError,
)

__version__ = "0.1.0"
__all__ = [
    "CollocationSolver",
    "TrainConfig",
    "bfgs_minimize",
    "two_phase_train",
    "ProblemSpec",
    "TrialSolution",
    "penalty_error",
    "synergy_error",
    "catalog",
    "get_case",
    "load_problem_file",
    "CollonetError",
    "DegenerateGeometryError",
    "InvalidArgumentError",
    "SingularMatrixError",
]
