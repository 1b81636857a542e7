"""stagflow: differentiable staggered finite-volume incompressible flow solver."""

__version__ = "0.1.0"

from .bcs import BoundarySpec, Dirichlet, Periodic, Symmetric
from .errors import ConfigurationError, ConvergenceError, NumericalError
from .fields import (
    ScalarField,
    VelocityField,
    fill_ghosts_scalar,
    fill_ghosts_velocity,
    interpolate_to_centers,
)
from .grid import (
    AxisCoords,
    Grid,
    build_grid,
    cosine_grid,
    stretched_grid,
    tanh_grid,
    uniform_grid,
)
from .les import ClosureModel
from .operators import (
    convection,
    diffusion,
    divergence,
    kinetic_energy,
    momentum_rhs,
    pressure_gradient,
)
from .poisson import (
    CGPoissonSolver,
    DirectPoissonSolver,
    SpectralPoissonSolver,
    make_solver,
    project,
)
from .timestep import SSP33, WRAY3, Setup, cfl_dt, rk_step, simulate, wray3_step

__all__ = [
    "AxisCoords",
    "BoundarySpec",
    "CGPoissonSolver",
    "ClosureModel",
    "ConfigurationError",
    "ConvergenceError",
    "DirectPoissonSolver",
    "Dirichlet",
    "Grid",
    "NumericalError",
    "Periodic",
    "ScalarField",
    "Setup",
    "SpectralPoissonSolver",
    "SSP33",
    "Symmetric",
    "VelocityField",
    "WRAY3",
    "build_grid",
    "cfl_dt",
    "convection",
    "cosine_grid",
    "diffusion",
    "divergence",
    "fill_ghosts_scalar",
    "fill_ghosts_velocity",
    "interpolate_to_centers",
    "kinetic_energy",
    "make_solver",
    "momentum_rhs",
    "pressure_gradient",
    "project",
    "rk_step",
    "simulate",
    "stretched_grid",
    "tanh_grid",
    "uniform_grid",
    "wray3_step",
]
