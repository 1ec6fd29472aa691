"""Nearly-conservative Lagrange-Galerkin BDF solvers for advection-diffusion on triangles."""
from ._backend import get_backend, set_backend
from .characteristics import RKConfig, VelocityField
from .harness import (
    ManufacturedProblem,
    convergence_sweep,
    pulse_problem,
    simulate,
    smooth_neumann_problem,
)
from .mesh import Mesh, build_uniform_square_mesh
from .quadrature import simplex_quadrature
from .scheme import SchemeConfig, bdf_coefficients, run
from .solver import SolverConfig, SolverError, cg_solve
from .space import LagrangeSpace, ScalarField, build_space

__version__ = "0.1.0"

__all__ = [
    "LagrangeSpace",
    "ManufacturedProblem",
    "Mesh",
    "RKConfig",
    "ScalarField",
    "SchemeConfig",
    "SolverConfig",
    "SolverError",
    "VelocityField",
    "bdf_coefficients",
    "build_space",
    "build_uniform_square_mesh",
    "cg_solve",
    "convergence_sweep",
    "get_backend",
    "pulse_problem",
    "run",
    "set_backend",
    "simplex_quadrature",
    "simulate",
    "smooth_neumann_problem",
]
