"""Hand-written pullback (adjoint) kernels for the forward operators.

Each pullback is the exact transpose of the corresponding forward kernel
composed with its ghost fill: cotangent contributions are scattered
through the mirrored stencil slices into an extended buffer, ghost
entries are folded back onto their fill sources, and non-DOF entries are
zeroed.  Convection is nonlinear, so its pullback consumes the stored
primal state; every one of the eight appearances of the velocity in the
forward flux contributes one scatter group.

The differentiable time-stepping path (``unrolled_gradient``) supports
periodic boundaries.
"""

import numpy as np

from .bcs import Dirichlet, Periodic, Symmetric
from .errors import ConfigurationError
from .fields import ScalarField, VelocityField, _axslice, fill_ghosts_scalar, fill_ghosts_velocity
from .operators import (
    _table,
    divergence,
    momentum_rhs,
    pressure_gradient,
    shifted,
    stencils,
    velocity_weights,
    pressure_weights,
)


def zero_ghosts_scalar(f):
    d = f.grid.dim
    for a, n in enumerate(f.grid.shape):
        f.data[_axslice(d, a, 0)] = 0.0
        f.data[_axslice(d, a, n + 1)] = 0.0
    return f


def zero_non_dofs_velocity(v):
    grid = v.grid
    d = grid.dim
    for comp in range(d):
        arr = v.u[comp]
        for a, n in enumerate(grid.shape):
            arr[_axslice(d, a, 0)] = 0.0
            arr[_axslice(d, a, n + 1)] = 0.0
            if comp == a and not grid.periodic[a]:
                arr[_axslice(d, a, n)] = 0.0
    return v


def fold_ghosts_scalar(f, bcs):
    """Adjoint of the scalar ghost fill: accumulate ghosts onto sources."""
    d = f.grid.dim
    data = f.data
    for a in reversed(range(d)):
        n = f.grid.shape[a]
        lo, hi = bcs.sides[a]
        g_lo = _axslice(d, a, 0)
        g_hi = _axslice(d, a, n + 1)
        if isinstance(lo, Periodic):
            data[_axslice(d, a, n)] += data[g_lo]
            data[_axslice(d, a, 1)] += data[g_hi]
        else:
            data[_axslice(d, a, 1)] += data[g_lo]
            data[_axslice(d, a, n)] += data[g_hi]
        data[g_lo] = 0.0
        data[g_hi] = 0.0
    return f


def fold_ghosts_velocity(v, bcs):
    """Adjoint of the velocity ghost fill (reversed axis order)."""
    grid = v.grid
    d = grid.dim
    for a in reversed(range(d)):
        n = grid.shape[a]
        lo, hi = bcs.sides[a]
        for comp in range(d):
            arr = v.u[comp]
            g_lo = _axslice(d, a, 0)
            g_hi = _axslice(d, a, n + 1)
            if isinstance(lo, Periodic):
                arr[_axslice(d, a, n)] += arr[g_lo]
                arr[_axslice(d, a, 1)] += arr[g_hi]
                arr[g_lo] = 0.0
                arr[g_hi] = 0.0
                continue
            normal = comp == a
            if isinstance(lo, Dirichlet):
                if not normal:
                    arr[_axslice(d, a, 1)] -= arr[g_lo]
            elif isinstance(lo, Symmetric):
                if not normal:
                    arr[_axslice(d, a, 1)] += arr[g_lo]
            arr[g_lo] = 0.0
            if isinstance(hi, Dirichlet):
                if normal:
                    arr[_axslice(d, a, n - 1)] -= arr[g_hi]
                    arr[_axslice(d, a, n)] = 0.0
                else:
                    arr[_axslice(d, a, n)] -= arr[g_hi]
            elif isinstance(hi, Symmetric):
                if normal:
                    arr[_axslice(d, a, n - 1)] -= arr[g_hi]
                    arr[_axslice(d, a, n)] = 0.0
                else:
                    arr[_axslice(d, a, n)] += arr[g_hi]
            arr[g_hi] = 0.0
    return v


def divergence_pullback(pbar, bcs, out=None):
    """Transpose of (ghost fill ∘ divergence) applied to a scalar cotangent."""
    grid = pbar.grid
    if out is None:
        out = VelocityField(grid)
    zero_ghosts_scalar(pbar)
    p = grid.p_slices()
    for a in range(grid.dim):
        out.u[a].fill(0.0)
        g = pbar.data[p] / _table(grid, grid.dx[a], a, p[a])
        out.u[a][p] += g
        out.u[a][shifted(p, a, -1)] -= g
    fold_ghosts_velocity(out, bcs)
    zero_non_dofs_velocity(out)
    return out


def pressure_gradient_pullback(vbar, bcs, out=None):
    """Transpose of (ghost fill ∘ pressure gradient)."""
    grid = vbar.grid
    if out is None:
        out = ScalarField(grid)
    zero_non_dofs_velocity(vbar)
    out.data.fill(0.0)
    for a in range(grid.dim):
        sl = grid.u_slices(a)
        g = vbar.u[a][sl] / _table(grid, grid.du[a], a, sl[a])
        out.data[shifted(sl, a, 1)] += g
        out.data[sl] -= g
    fold_ghosts_scalar(out, bcs)
    zero_ghosts_scalar(out)
    return out


def diffusion_pullback(vbar, nu, bcs, out=None):
    """Transpose of (ghost fill ∘ diffusion); three bands per direction."""
    grid = vbar.grid
    if out is None:
        out = VelocityField(grid)
    zero_non_dofs_velocity(vbar)
    st = stencils(grid)
    for a in range(grid.dim):
        out.u[a].fill(0.0)
        sl = grid.u_slices(a)
        for b in range(grid.dim):
            if b == a:
                k_hi = _table(grid, st.dif_own_hi[a], a, sl[a])
                k_lo = _table(grid, st.dif_own_lo[a], a, sl[a])
            else:
                k_hi = _table(grid, st.dif_tan_hi[b], b, sl[b])
                k_lo = _table(grid, st.dif_tan_lo[b], b, sl[b])
            t_hi = nu * vbar.u[a][sl] * k_hi
            t_lo = nu * vbar.u[a][sl] * k_lo
            out.u[a][shifted(sl, b, 1)] += t_hi
            out.u[a][sl] -= t_hi
            out.u[a][sl] -= t_lo
            out.u[a][shifted(sl, b, -1)] += t_lo
    fold_ghosts_velocity(out, bcs)
    zero_non_dofs_velocity(out)
    return out


def convection_pullback(vbar, u, bcs, out=None):
    """Pullback of the convective kernel at the stored primal state ``u``.

    Scatters through all eight appearances of the velocity in the flux
    products (transported pair and transporting pair, on both faces, for
    every direction).
    """
    grid = vbar.grid
    if out is None:
        out = VelocityField(grid)
    for a in range(grid.dim):
        out.u[a].fill(0.0)
    zero_non_dofs_velocity(vbar)
    fill_ghosts_velocity(u, bcs)
    iw = stencils(grid).interp
    for a in range(grid.dim):
        sl = grid.u_slices(a)
        ua = u.u[a]
        for b in range(grid.dim):
            tp = 0.5 * (ua[sl] + ua[shifted(sl, b, 1)])
            tm = 0.5 * (ua[shifted(sl, b, -1)] + ua[sl])
            if b == a:
                g = vbar.u[a][sl] / _table(grid, grid.du[a], a, sl[a])
                gp = g * tp
                gm = g * tm
                out.u[a][sl] -= gp
                out.u[a][shifted(sl, a, 1)] -= gp
                out.u[a][shifted(sl, a, -1)] += gm
                out.u[a][sl] += gm
            else:
                ub = u.u[b]
                w_lo = _table(grid, iw.w_lo[a], a, sl[a])
                w_hi = _table(grid, iw.w_hi[a], a, sl[a])
                slm = shifted(sl, b, -1)
                vp = w_lo * ub[sl] + w_hi * ub[shifted(sl, a, 1)]
                vm = w_lo * ub[slm] + w_hi * ub[shifted(slm, a, 1)]
                g = vbar.u[a][sl] / _table(grid, grid.dx[b], b, sl[b])
                h = 0.5 * g * vp
                out.u[a][sl] -= h
                out.u[a][shifted(sl, b, 1)] -= h
                h = 0.5 * g * vm
                out.u[a][slm] += h
                out.u[a][sl] += h
                r = g * tp
                out.u[b][sl] -= w_lo * r
                out.u[b][shifted(sl, a, 1)] -= w_hi * r
                r = g * tm
                out.u[b][slm] += w_lo * r
                out.u[b][shifted(slm, a, 1)] += w_hi * r
    fold_ghosts_velocity(out, bcs)
    zero_non_dofs_velocity(out)
    return out


def poisson_pullback(pbar, solver):
    """Cotangent of a pressure solve; the operator is self-adjoint, so the
    pullback is itself a solve."""
    return solver.solve(pbar)


def poisson_solve_transpose(pbar, solver):
    """Euclidean transpose of the solve, exact on stretched grids too.

    The assembled volume-weighted operator is symmetric, so the transpose
    of the solve is a weighted conjugation of it; on uniform grids the
    weights cancel and this reduces to a plain solve.
    """
    grid = pbar.grid
    w = pressure_weights(grid)
    tmp = ScalarField(grid)
    tmp.interior[...] = pbar.interior / w
    res = solver.solve(tmp)
    out = ScalarField(grid)
    out.interior[...] = res.interior * w
    return out


def rhs_pullback(vbar, u, nu, bcs, out=None):
    """Pullback of the momentum right-hand side (convection + diffusion;
    constant forcing carries no velocity dependence)."""
    out = convection_pullback(vbar, u, bcs, out=out)
    if nu != 0.0:
        dif = diffusion_pullback(vbar, nu, bcs)
        for a in range(u.grid.dim):
            out.u[a] += dif.u[a]
    return out


def kinetic_energy_pullback(u, out=None):
    """Gradient of the kinetic energy: the volume-weighted velocity."""
    grid = u.grid
    if out is None:
        out = VelocityField(grid)
    for a, w in enumerate(velocity_weights(grid)):
        out.u[a].fill(0.0)
        sl = grid.u_slices(a)
        out.u[a][sl] = w * u.u[a][sl]
    return out


class KineticEnergyLoss:
    """loss(u) = kinetic energy of the final velocity."""

    def value(self, u):
        from .operators import kinetic_energy

        return kinetic_energy(u)

    def gradient(self, u):
        return kinetic_energy_pullback(u)


class InnerProductLoss:
    """loss(u) = plain (unweighted) inner product with a fixed field."""

    def __init__(self, c):
        self.c = c

    def value(self, u):
        grid = u.grid
        return float(
            sum(
                np.sum(self.c.u[a][grid.u_slices(a)] * u.u[a][grid.u_slices(a)])
                for a in range(grid.dim)
            )
        )

    def gradient(self, u):
        grid = u.grid
        out = VelocityField(grid)
        for a in range(grid.dim):
            sl = grid.u_slices(a)
            out.u[a][sl] = self.c.u[a][sl]
        return out


def _require_periodic(bcs):
    if not all(bcs.periodic):
        raise ConfigurationError(
            "the differentiable time-stepping path supports periodic boundaries only"
        )


def project_with_tape(u, solver, bcs):
    """Pure projection returning the projected field (ghosts filled)."""
    fill_ghosts_velocity(u, bcs)
    div = divergence(u)
    p = solver.solve(div)
    fill_ghosts_scalar(p, bcs)
    g = pressure_gradient(p)
    out = VelocityField(u.grid)
    for a in range(u.grid.dim):
        out.u[a][...] = u.u[a]
        sl = u.grid.u_slices(a)
        out.u[a][sl] -= g.u[a][sl]
    fill_ghosts_velocity(out, bcs)
    return out


def project_pullback(vbar, solver, bcs):
    """Transpose of the projection: identity minus the solve sandwich."""
    grid = vbar.grid
    zero_non_dofs_velocity(vbar)
    gbar = VelocityField(grid)
    for a in range(grid.dim):
        gbar.u[a][grid.u_slices(a)] = -vbar.u[a][grid.u_slices(a)]
    pbar = pressure_gradient_pullback(gbar, bcs)
    sbar = poisson_solve_transpose(pbar, solver)
    dbar = divergence_pullback(sbar, bcs)
    out = VelocityField(grid)
    for a in range(grid.dim):
        sl = grid.u_slices(a)
        out.u[a][sl] = vbar.u[a][sl] + dbar.u[a][sl]
    return out


def step_forward_tape(u0, dt, tableau, solver, setup):
    """One projected explicit Runge-Kutta step, recording stage states."""
    bcs = setup.bcs
    grid = u0.grid
    s = tableau.stages
    stages = []
    ks = []
    fill_ghosts_velocity(u0, bcs)
    for j in range(s):
        if j == 0:
            yj = u0
        else:
            acc = VelocityField(grid)
            for a in range(grid.dim):
                acc.u[a][...] = u0.u[a]
                sl = grid.u_slices(a)
                for l in range(j):
                    aa = tableau.a[j][l]
                    if aa != 0.0:
                        acc.u[a][sl] += (dt * aa) * ks[l].u[a][sl]
            yj = project_with_tape(acc, solver, bcs)
        stages.append(yj)
        kj = momentum_rhs(yj, setup.nu, force=setup.force)
        ks.append(kj)
    acc = VelocityField(grid)
    for a in range(grid.dim):
        acc.u[a][...] = u0.u[a]
        sl = grid.u_slices(a)
        for l in range(s):
            if tableau.b[l] != 0.0:
                acc.u[a][sl] += (dt * tableau.b[l]) * ks[l].u[a][sl]
    u1 = project_with_tape(acc, solver, bcs)
    return u1, (stages, dt, tableau)


def step_backward(tape, ubar, solver, setup):
    """Back-propagate a cotangent through one recorded step."""
    stages, dt, tableau = tape
    bcs = setup.bcs
    grid = stages[0].grid
    s = tableau.stages
    ybar = project_pullback(ubar, solver, bcs)
    g0 = ybar.copy()
    kbars = [None] * s
    for l in range(s):
        if tableau.b[l] != 0.0:
            kb = VelocityField(grid)
            for a in range(grid.dim):
                sl = grid.u_slices(a)
                kb.u[a][sl] = (dt * tableau.b[l]) * ybar.u[a][sl]
            kbars[l] = kb
    for j in reversed(range(s)):
        if kbars[j] is None:
            continue
        fb = rhs_pullback(kbars[j], stages[j], setup.nu, bcs)
        if j == 0:
            for a in range(grid.dim):
                sl = grid.u_slices(a)
                g0.u[a][sl] += fb.u[a][sl]
            continue
        ybar_j = project_pullback(fb, solver, bcs)
        for a in range(grid.dim):
            sl = grid.u_slices(a)
            g0.u[a][sl] += ybar_j.u[a][sl]
            for l in range(j):
                aa = tableau.a[j][l]
                if aa != 0.0:
                    if kbars[l] is None:
                        kbars[l] = VelocityField(grid)
                    kbars[l].u[a][sl] += (dt * aa) * ybar_j.u[a][sl]
    return g0


def unrolled_gradient(loss, u0, n_steps, dt, setup):
    """Gradient of ``loss`` at the final state with respect to ``u0``.

    Runs the projected Runge-Kutta forward pass storing every stage,
    seeds with the loss gradient, and composes the stage pullbacks in
    reverse.  Periodic boundaries only.
    """
    _require_periodic(setup.bcs)
    tableau = setup.tableau
    solver = setup.solver
    u = u0.copy()
    tapes = []
    for _ in range(n_steps):
        u, tape = step_forward_tape(u, dt, tableau, solver, setup)
        tapes.append(tape)
    ubar = loss.gradient(u)
    for tape in reversed(tapes):
        ubar = step_backward(tape, ubar, solver, setup)
    zero_non_dofs_velocity(ubar)
    return ubar
