"""Finite-difference verification of the adjoint kernels.

For an operator K with pullback Kbar, random states u, perturbations du,
and cotangent seeds ybar must satisfy

    <ybar, K(u + eps du) - K(u - eps du)> / (2 eps) = <Kbar(ybar), du>

to rounding for the linear kernels and to O(eps^2) for convection
(whose centered difference is exact as well, being quadratic).  The
inner products are plain sums over the interior degrees of freedom.
"""

import numpy as np

from .adjoint import (
    convection_pullback,
    diffusion_pullback,
    divergence_pullback,
    pressure_gradient_pullback,
)
from .bcs import BoundarySpec
from .fields import ScalarField, VelocityField, fill_ghosts_scalar, fill_ghosts_velocity
from .grid import Grid, tanh_grid, uniform_grid
from .operators import convection, diffusion, divergence, pressure_gradient

OPERATORS = ("divergence", "gradient", "diffusion", "convection")


def check_grid(shape, stretched=False, dtype=np.float64):
    axes = []
    for i, n in enumerate(shape):
        if stretched:
            axes.append(tanh_grid(0.0, 1.0 + 0.3 * i, n, 1.4))
        else:
            axes.append(uniform_grid(0.0, 1.0 + 0.3 * i, n))
    return Grid(tuple(axes), (True,) * len(shape), dtype=dtype)


def random_velocity(grid, rng):
    v = VelocityField(grid)
    for a in range(grid.dim):
        v.u[a][grid.u_slices(a)] = rng.standard_normal(
            v.u[a][grid.u_slices(a)].shape
        )
    return v


def random_scalar(grid, rng):
    f = ScalarField(grid)
    f.interior[...] = rng.standard_normal(grid.shape)
    return f


def _dot_vel(a, b):
    grid = a.grid
    return float(
        sum(
            np.sum(a.u[c][grid.u_slices(c)] * b.u[c][grid.u_slices(c)])
            for c in range(grid.dim)
        )
    )


def _axpy_vel(u, du, eps):
    out = u.copy()
    for a in range(u.grid.dim):
        sl = u.grid.u_slices(a)
        out.u[a][sl] += eps * du.u[a][sl]
    return out


def fd_identity_error(op, grid, bcs, rng, eps=1e-6, nu=0.7):
    """Relative mismatch of the centered-difference adjoint identity."""
    if op == "gradient":
        p = random_scalar(grid, rng)
        dp = random_scalar(grid, rng)
        ybar = random_velocity(grid, rng)

        def apply_at(s):
            f = ScalarField(grid)
            f.interior[...] = p.interior + s * dp.interior
            fill_ghosts_scalar(f, bcs)
            return pressure_gradient(f)

        lhs = (_dot_vel(ybar, apply_at(eps)) - _dot_vel(ybar, apply_at(-eps))) / (2 * eps)
        pb = pressure_gradient_pullback(ybar.copy(), bcs)
        rhs = float(np.sum(pb.interior * dp.interior))
        return abs(lhs - rhs) / max(abs(rhs), 1e-300)

    u = random_velocity(grid, rng)
    du = random_velocity(grid, rng)
    if op == "divergence":
        ybar = random_scalar(grid, rng)

        def value(s):
            v = _axpy_vel(u, du, s)
            fill_ghosts_velocity(v, bcs)
            return float(np.sum(ybar.interior * divergence(v).interior))

        lhs = (value(eps) - value(-eps)) / (2 * eps)
        pb = divergence_pullback(ybar.copy(), bcs)
        rhs = _dot_vel(pb, du)
        return abs(lhs - rhs) / max(abs(rhs), 1e-300)

    ybar = random_velocity(grid, rng)
    if op == "diffusion":
        def value(s):
            v = _axpy_vel(u, du, s)
            fill_ghosts_velocity(v, bcs)
            return _dot_vel(ybar, diffusion(v, nu))

        lhs = (value(eps) - value(-eps)) / (2 * eps)
        pb = diffusion_pullback(ybar.copy(), nu, bcs)
    elif op == "convection":
        def value(s):
            v = _axpy_vel(u, du, s)
            fill_ghosts_velocity(v, bcs)
            return _dot_vel(ybar, convection(v))

        lhs = (value(eps) - value(-eps)) / (2 * eps)
        fill_ghosts_velocity(u, bcs)
        pb = convection_pullback(ybar.copy(), u, bcs)
    else:
        raise ValueError(f"unknown operator {op!r}")
    rhs = _dot_vel(pb, du)
    return abs(lhs - rhs) / max(abs(rhs), 1e-300)


def adjoint_check_rows(n_seeds=50, eps=1e-6, tol=1e-5):
    """Worst finite-difference identity error per operator over random
    seeds, grids (2D 8x7 and 3D 6x5x4), uniform and stretched."""
    rows = []
    for op in OPERATORS:
        worst = 0.0
        for shape in ((8, 7), (6, 5, 4)):
            for stretched in (False, True):
                grid = check_grid(shape, stretched=stretched)
                bcs = BoundarySpec.all_periodic(len(shape))
                rng = np.random.default_rng(1234)
                for _ in range(n_seeds):
                    err = fd_identity_error(op, grid, bcs, rng, eps=eps)
                    worst = max(worst, err)
        rows.append(
            {"operator": op, "fd_rel_error": worst, "pass": worst <= tol}
        )
    return rows
