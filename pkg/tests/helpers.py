"""Shared test utilities: dense operator probing and random fields."""

import numpy as np

from stagflow.bcs import BoundarySpec
from stagflow.fields import ScalarField, VelocityField, fill_ghosts_scalar, fill_ghosts_velocity
from stagflow.grid import Grid, tanh_grid, uniform_grid


def make_grid(shape, stretched=False, lengths=None, dtype=np.float64, gamma=1.4):
    axes = []
    for i, n in enumerate(shape):
        length = 1.0 + 0.3 * i if lengths is None else lengths[i]
        if stretched:
            axes.append(tanh_grid(0.0, length, n, gamma))
        else:
            axes.append(uniform_grid(0.0, length, n))
    return Grid(tuple(axes), (True,) * len(shape), dtype=dtype)


def periodic_bcs(dim):
    return BoundarySpec.all_periodic(dim)


def rand_velocity(grid, rng):
    v = VelocityField(grid)
    for a in range(grid.dim):
        sl = grid.u_slices(a)
        v.u[a][sl] = rng.standard_normal(v.u[a][sl].shape)
    return v


def rand_scalar(grid, rng):
    f = ScalarField(grid)
    f.interior[...] = rng.standard_normal(grid.shape)
    return f


def vel_dof_count(grid):
    return sum(
        int(np.prod([s.stop - s.start for s in grid.u_slices(a)]))
        for a in range(grid.dim)
    )


def vel_to_vec(v):
    grid = v.grid
    return np.concatenate(
        [v.u[a][grid.u_slices(a)].ravel() for a in range(grid.dim)]
    )


def vec_to_vel(grid, x):
    v = VelocityField(grid)
    at = 0
    for a in range(grid.dim):
        sl = grid.u_slices(a)
        size = int(np.prod([s.stop - s.start for s in sl]))
        v.u[a][sl] = x[at : at + size].reshape(
            tuple(s.stop - s.start for s in sl)
        )
        at += size
    return v


def dense_vel_to_vel(grid, bcs, apply_fn):
    """Dense matrix of a velocity->velocity map via basis probing
    (the map includes the ghost fill)."""
    n = vel_dof_count(grid)
    mat = np.zeros((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        v = vec_to_vel(grid, e)
        fill_ghosts_velocity(v, bcs)
        mat[:, k] = vel_to_vec(apply_fn(v))
    return mat


def dense_vel_to_scalar(grid, bcs, apply_fn):
    n = vel_dof_count(grid)
    m = int(np.prod(grid.shape))
    mat = np.zeros((m, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        v = vec_to_vel(grid, e)
        fill_ghosts_velocity(v, bcs)
        mat[:, k] = apply_fn(v).interior.ravel()
    return mat


def dense_scalar_to_vel(grid, bcs, apply_fn):
    n = vel_dof_count(grid)
    m = int(np.prod(grid.shape))
    mat = np.zeros((n, m))
    for k in range(m):
        f = ScalarField(grid)
        f.interior.flat[k] = 1.0
        fill_ghosts_scalar(f, bcs)
        mat[:, k] = vel_to_vec(apply_fn(f))
    return mat
