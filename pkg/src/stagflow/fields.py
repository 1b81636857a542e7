"""Staggered field containers and ghost filling.

All field arrays share the grid's extended shape (one ghost layer per
side).  Velocity component ``a`` at array index ``I`` sits on face
``I_a`` in its own direction and at volume centers in the others;
scalars sit at volume centers.  Interior stencils therefore never need
index special cases once the ghost layer is filled.
"""

import numpy as np

from . import alloc
from .bcs import Dirichlet, Periodic, Symmetric


class ScalarField:
    """Volume-centered scalar with ghost layer."""

    def __init__(self, grid, data=None):
        self.grid = grid
        self.data = data if data is not None else alloc.zeros(grid.ext_shape, grid.dtype)

    @property
    def interior(self):
        return self.data[self.grid.p_slices()]

    def copy(self):
        f = ScalarField(self.grid)
        f.data[...] = self.data
        return f


class VelocityField:
    """d staggered velocity components, each with the extended extent."""

    def __init__(self, grid, components=None):
        self.grid = grid
        if components is None:
            components = [alloc.zeros(grid.ext_shape, grid.dtype) for _ in range(grid.dim)]
        self.u = list(components)

    def copy(self):
        v = VelocityField(self.grid)
        for dst, src in zip(v.u, self.u):
            dst[...] = src
        return v

    def copy_from(self, other):
        for dst, src in zip(self.u, other.u):
            dst[...] = src

    def interiors(self):
        return [self.u[a][self.grid.u_slices(a)] for a in range(self.grid.dim)]


def _axslice(ndim, axis, idx):
    sl = [slice(None)] * ndim
    sl[axis] = idx
    return tuple(sl)


def _wall_coords(grid, component, axis, wall_x):
    """Coordinate arrays (broadcastable over a ghost slice) at the wall."""
    coords = []
    for g in range(grid.dim):
        if g == axis:
            coords.append(np.asarray(wall_x, dtype=grid.dtype))
        else:
            c = grid.face_coords(component)[g]
            coords.append(grid.broadcast(c, g)[_axslice(grid.dim, axis, 0)])
    return coords


def _dirichlet_value(grid, bc, component, axis, side, t):
    wall_x = grid.xb[axis][0] if side == 0 else grid.xb[axis][grid.shape[axis]]
    if callable(bc.values):
        return bc.values(component, *_wall_coords(grid, component, axis, wall_x), t)
    return bc.component_value(component)


def fill_ghosts_scalar(f, bcs):
    """Fill scalar ghosts: periodic wrap, zero normal gradient otherwise."""
    d = f.grid.dim
    data = f.data
    for a, n in enumerate(f.grid.shape):
        lo, hi = bcs.sides[a]
        if isinstance(lo, Periodic):
            data[_axslice(d, a, 0)] = data[_axslice(d, a, n)]
            data[_axslice(d, a, n + 1)] = data[_axslice(d, a, 1)]
        else:
            data[_axslice(d, a, 0)] = data[_axslice(d, a, 1)]
            data[_axslice(d, a, n + 1)] = data[_axslice(d, a, n)]
    return f


def fill_ghosts_velocity(v, bcs, t=0.0):
    """Fill velocity ghosts and boundary faces for the given conditions.

    Dirichlet sets the normal component on the boundary faces and reflects
    tangential ghosts so the two-point wall average equals the prescribed
    value.  Symmetric zeroes the normal boundary faces and mirrors
    tangential ghosts (zero normal gradient).
    """
    grid = v.grid
    d = grid.dim
    for a, n in enumerate(grid.shape):
        lo, hi = bcs.sides[a]
        for comp in range(d):
            arr = v.u[comp]
            if isinstance(lo, Periodic):
                arr[_axslice(d, a, 0)] = arr[_axslice(d, a, n)]
                arr[_axslice(d, a, n + 1)] = arr[_axslice(d, a, 1)]
                continue
            normal = comp == a
            if isinstance(lo, Dirichlet):
                if normal:
                    arr[_axslice(d, a, 0)] = _dirichlet_value(grid, lo, comp, a, 0, t)
                else:
                    val = _dirichlet_value(grid, lo, comp, a, 0, t)
                    arr[_axslice(d, a, 0)] = 2.0 * val - arr[_axslice(d, a, 1)]
            elif isinstance(lo, Symmetric):
                if normal:
                    arr[_axslice(d, a, 0)] = 0.0
                else:
                    arr[_axslice(d, a, 0)] = arr[_axslice(d, a, 1)]
            if isinstance(hi, Dirichlet):
                if normal:
                    val = _dirichlet_value(grid, hi, comp, a, 1, t)
                    arr[_axslice(d, a, n)] = val
                    arr[_axslice(d, a, n + 1)] = 2.0 * val - arr[_axslice(d, a, n - 1)]
                else:
                    val = _dirichlet_value(grid, hi, comp, a, 1, t)
                    arr[_axslice(d, a, n + 1)] = 2.0 * val - arr[_axslice(d, a, n)]
            elif isinstance(hi, Symmetric):
                if normal:
                    arr[_axslice(d, a, n)] = 0.0
                    arr[_axslice(d, a, n + 1)] = -arr[_axslice(d, a, n - 1)]
                else:
                    arr[_axslice(d, a, n + 1)] = arr[_axslice(d, a, n)]
    return v


def interpolate_to_centers(v):
    """Collocate each velocity component at the volume centers.

    The center of a volume is the midpoint of its two faces, so the
    two-point average is the exact linear interpolant on any grid.
    Requires filled ghosts.  Returns one interior array per component.
    """
    grid = v.grid
    p = grid.p_slices()
    out = []
    for a in range(grid.dim):
        lo = list(p)
        lo[a] = slice(0, grid.shape[a])
        out.append(0.5 * (v.u[a][tuple(lo)] + v.u[a][p]))
    return out

