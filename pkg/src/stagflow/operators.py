"""Matrix-free staggered finite-volume stencil kernels.

Every kernel has a pure form (allocates its output) and an in-place form
(``out=`` plus a :class:`KernelScratch` of preallocated work arrays); both
share the same slice arithmetic, so the numerics are identical.  Kernels
read ghost values and therefore require filled ghosts; they write only
the degree-of-freedom ranges of their output and zero the rest.

Convective interpolation
------------------------
The convective flux of component ``a`` through a face of its control
volume in direction ``b`` is the product of two interpolants:

* the transported component ``a`` averaged with weights 1/2, and
* the transporting component ``b`` averaged with weights proportional to
  the adjacent volume widths (so the control-volume mass balance is the
  half-sum of the two neighboring pressure-volume balances).

This combination makes the convection operator exactly skew-symmetric in
the velocity-volume-weighted inner product whenever the discrete
divergence vanishes, on uniform and stretched grids alike.
"""

import numpy as np

from . import alloc
from .fields import ScalarField, VelocityField


def shifted(slices, axis, offset):
    """Shift one axis of a slice tuple by a fixed offset."""
    out = list(slices)
    s = out[axis]
    out[axis] = slice(s.start + offset, s.stop + offset)
    return tuple(out)


class InterpWeights:
    """Per-axis convective interpolation tables.

    ``w_lo[a][i]`` / ``w_hi[a][i]`` weight the lower / upper neighbor when
    the transporting component is interpolated to face ``i`` of axis
    ``a``; they are the adjacent volume-width fractions and reduce to 1/2
    on uniform grids.  The transported component always uses 1/2.
    """

    def __init__(self, grid):
        self.w_lo = []
        self.w_hi = []
        for a in range(grid.dim):
            dx, du = grid.dx[a], grid.du[a]
            lo = dx / (2.0 * du)
            hi = 1.0 - lo
            lo.flags.writeable = False
            hi.flags.writeable = False
            self.w_lo.append(lo)
            self.w_hi.append(hi)


class Stencils:
    """Precomputed width-derived coefficient tables for one grid."""

    def __init__(self, grid):
        self.interp = InterpWeights(grid)
        # Diffusion bands: "own" for the direction of the component
        # (staggered widths du around faces), "tan" for the others.
        self.dif_own_hi, self.dif_own_lo = [], []
        self.dif_tan_hi, self.dif_tan_lo = [], []
        for a, n in enumerate(grid.shape):
            dx, du = grid.dx[a], grid.du[a]
            own_hi = np.zeros(n + 2, dtype=grid.dtype)
            own_lo = np.zeros(n + 2, dtype=grid.dtype)
            own_hi[: n + 1] = 1.0 / (du[: n + 1] * dx[1 : n + 2])
            own_lo[: n + 1] = 1.0 / (du[: n + 1] * dx[: n + 1])
            tan_hi = np.zeros(n + 2, dtype=grid.dtype)
            tan_lo = np.zeros(n + 2, dtype=grid.dtype)
            tan_hi[: n + 1] = 1.0 / (dx[: n + 1] * du[: n + 1])
            tan_lo[1:] = 1.0 / (dx[1:] * du[:-1])
            for arr in (own_hi, own_lo, tan_hi, tan_lo):
                arr.flags.writeable = False
            self.dif_own_hi.append(own_hi)
            self.dif_own_lo.append(own_lo)
            self.dif_tan_hi.append(tan_hi)
            self.dif_tan_lo.append(tan_lo)


def stencils(grid):
    if grid._stencils is None:
        grid._stencils = Stencils(grid)
    return grid._stencils


class KernelScratch:
    """Four extended-shape work arrays shared by the in-place kernels."""

    def __init__(self, grid):
        self.w1 = alloc.zeros(grid.ext_shape, grid.dtype)
        self.w2 = alloc.zeros(grid.ext_shape, grid.dtype)
        self.w3 = alloc.zeros(grid.ext_shape, grid.dtype)
        self.w4 = alloc.zeros(grid.ext_shape, grid.dtype)


def _table(grid, values, axis, s):
    """Slice a per-axis 1D table and shape it to broadcast along ``axis``."""
    return grid.broadcast(values[s], axis)


def divergence(u, out=None, scratch=None):
    """Net outflow per unit volume at every interior pressure point."""
    grid = u.grid
    if out is None:
        out = ScalarField(grid)
    if scratch is None:
        scratch = KernelScratch(grid)
    p = grid.p_slices()
    out.data.fill(0.0)
    t = scratch.w1[p]
    for a in range(grid.dim):
        np.subtract(u.u[a][p], u.u[a][shifted(p, a, -1)], out=t)
        t /= _table(grid, grid.dx[a], a, p[a])
        out.data[p] += t
    return out


def pressure_gradient(pf, out=None):
    """Two-point pressure difference at every interior velocity point."""
    grid = pf.grid
    if out is None:
        out = VelocityField(grid)
    p = pf.data
    for a in range(grid.dim):
        out.u[a].fill(0.0)
        sl = grid.u_slices(a)
        tgt = out.u[a][sl]
        np.subtract(p[shifted(sl, a, 1)], p[sl], out=tgt)
        tgt /= _table(grid, grid.du[a], a, sl[a])
    return out


def diffusion(u, nu, out=None, scratch=None, accumulate=False):
    """Second-difference viscous term with viscosity ``nu``."""
    if nu < 0:
        raise ValueError(f"viscosity must be nonnegative, got {nu}")
    grid = u.grid
    if out is None:
        out = VelocityField(grid)
    if scratch is None:
        scratch = KernelScratch(grid)
    st = stencils(grid)
    for a in range(grid.dim):
        sl = grid.u_slices(a)
        if not accumulate:
            out.u[a].fill(0.0)
        t1 = scratch.w1[sl]
        t2 = scratch.w2[sl]
        for b in range(grid.dim):
            if b == a:
                k_hi = _table(grid, st.dif_own_hi[a], a, sl[a])
                k_lo = _table(grid, st.dif_own_lo[a], a, sl[a])
            else:
                k_hi = _table(grid, st.dif_tan_hi[b], b, sl[b])
                k_lo = _table(grid, st.dif_tan_lo[b], b, sl[b])
            np.subtract(u.u[a][shifted(sl, b, 1)], u.u[a][sl], out=t1)
            t1 *= k_hi
            np.subtract(u.u[a][sl], u.u[a][shifted(sl, b, -1)], out=t2)
            t2 *= k_lo
            t1 -= t2
            t1 *= nu
            out.u[a][sl] += t1
    return out


def convection(u, out=None, scratch=None, accumulate=False):
    """Skew-form convective term (right-hand-side sign convention)."""
    grid = u.grid
    if out is None:
        out = VelocityField(grid)
    if scratch is None:
        scratch = KernelScratch(grid)
    iw = stencils(grid).interp
    for a in range(grid.dim):
        sl = grid.u_slices(a)
        if not accumulate:
            out.u[a].fill(0.0)
        tp = scratch.w1[sl]
        tm = scratch.w2[sl]
        vp = scratch.w3[sl]
        vm = scratch.w4[sl]
        for b in range(grid.dim):
            ua = u.u[a]
            np.add(ua[sl], ua[shifted(sl, b, 1)], out=tp)
            tp *= 0.5
            np.add(ua[shifted(sl, b, -1)], ua[sl], out=tm)
            tm *= 0.5
            if b == a:
                np.multiply(tp, tp, out=tp)
                np.multiply(tm, tm, out=tm)
                width = _table(grid, grid.du[a], a, sl[a])
            else:
                ub = u.u[b]
                w_lo = _table(grid, iw.w_lo[a], a, sl[a])
                w_hi = _table(grid, iw.w_hi[a], a, sl[a])
                np.multiply(ub[sl], w_lo, out=vp)
                np.multiply(ub[shifted(sl, a, 1)], w_hi, out=vm)
                vp += vm
                tp *= vp
                np.multiply(ub[shifted(sl, b, -1)], w_lo, out=vp)
                np.multiply(ub[shifted(shifted(sl, b, -1), a, 1)], w_hi, out=vm)
                vp += vm
                tm *= vp
                width = _table(grid, grid.dx[b], b, sl[b])
            tp -= tm
            tp /= width
            out.u[a][sl] -= tp
    return out


def momentum_rhs(u, nu, force=None, closure=None, t=0.0, out=None, scratch=None):
    """Convection + diffusion + body force (+ closure); no pressure term."""
    grid = u.grid
    if out is None:
        out = VelocityField(grid)
    if scratch is None:
        scratch = KernelScratch(grid)
    convection(u, out=out, scratch=scratch)
    if nu != 0.0:
        diffusion(u, nu, out=out, scratch=scratch, accumulate=True)
    if force is not None:
        for a in range(grid.dim):
            fa = force[a]
            if np.isscalar(fa):
                if fa != 0.0:
                    out.u[a][grid.u_slices(a)] += fa
            else:
                out.u[a][grid.u_slices(a)] += fa
    if closure is not None:
        closure.add_rhs(u, out, scratch)
    return out


def sample_force(grid, force):
    """Normalize a body-force description to per-component constants/arrays.

    Accepts ``None``, a d-vector of constants, or a callable
    ``f(component, *coords)`` sampled once at the velocity points.
    """
    if force is None:
        return None
    if callable(force):
        out = []
        for a in range(grid.dim):
            coords = [
                grid.broadcast(c, g)
                for g, c in enumerate(grid.face_coords(a))
            ]
            full = np.broadcast_to(force(a, *coords), grid.ext_shape)
            out.append(np.array(full[grid.u_slices(a)], dtype=grid.dtype))
        return out
    return [grid.dtype.type(f) for f in force]


def velocity_weights(grid):
    """Staggered control-volume measures, one interior array per component."""
    out = []
    for a in range(grid.dim):
        sl = grid.u_slices(a)
        w = np.ones((1,) * grid.dim, dtype=grid.dtype)
        for g in range(grid.dim):
            table = grid.du[g] if g == a else grid.dx[g]
            w = w * _table(grid, table, g, sl[g])
        out.append(np.ascontiguousarray(np.broadcast_to(w, tuple(s.stop - s.start for s in sl))))
    return out


def pressure_weights(grid):
    """Pressure volume measures on the interior range."""
    p = grid.p_slices()
    w = np.ones((1,) * grid.dim, dtype=grid.dtype)
    for g in range(grid.dim):
        w = w * _table(grid, grid.dx[g], g, p[g])
    return np.ascontiguousarray(np.broadcast_to(w, grid.shape))


def kinetic_energy(u):
    """Half the velocity-volume-weighted sum of squared components."""
    grid = u.grid
    total = 0.0
    for a, w in enumerate(velocity_weights(grid)):
        ua = u.u[a][grid.u_slices(a)]
        total += float(np.sum(w * ua * ua))
    return 0.5 * total


def weighted_inner(u, v):
    """Velocity-volume-weighted inner product of two fields."""
    grid = u.grid
    total = 0.0
    for a, w in enumerate(velocity_weights(grid)):
        sl = grid.u_slices(a)
        total += float(np.sum(w * u.u[a][sl] * v.u[a][sl]))
    return total
