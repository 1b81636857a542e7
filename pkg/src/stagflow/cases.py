"""Canonical flow cases, error norms, and precision studies.

The planar vortex field (an exact unsteady solution on the doubly
periodic square of side 2*pi) drives the spatial convergence studies;
the finite-difference V-curve isolates the truncation/round-off
trade-off of one-sided and centered first derivatives per float format.
"""

import math

import numpy as np

from .bcs import BoundarySpec
from .errors import ConfigurationError
from .fields import ScalarField, VelocityField, fill_ghosts_scalar, fill_ghosts_velocity
from .grid import Grid, tanh_grid, uniform_grid
from .operators import velocity_weights
from .timestep import Setup, simulate

TWO_PI = 2.0 * math.pi


def _check_taylor_green_grid(grid):
    if grid.dim != 2:
        raise ConfigurationError("the vortex solution is two-dimensional")
    if not all(grid.periodic):
        raise ConfigurationError("the vortex solution requires periodic axes")
    for ax in grid.axes:
        if not (abs(ax.a) < 1e-12 and abs(ax.b - TWO_PI) < 1e-12):
            raise ConfigurationError("the vortex domain is [0, 2*pi]^2")


def taylor_green(grid, nu, t=0.0):
    """Decaying planar vortex sampled at the staggered canonical points:

        u = -cos(x) sin(y) exp(-2 nu t)
        v =  sin(x) cos(y) exp(-2 nu t)
        p = -(cos(2x) + cos(2y))/4 exp(-4 nu t)
    """
    _check_taylor_green_grid(grid)
    decay = math.exp(-2.0 * nu * t)
    u = VelocityField(grid)
    xf = grid.broadcast(grid.xb[0], 0)
    yc = grid.broadcast(grid.xc[1], 1)
    u.u[0][...] = -np.cos(xf) * np.sin(yc) * decay
    xc = grid.broadcast(grid.xc[0], 0)
    yf = grid.broadcast(grid.xb[1], 1)
    u.u[1][...] = np.sin(xc) * np.cos(yf) * decay
    p = ScalarField(grid)
    p.data[...] = -0.25 * (np.cos(2.0 * xc) + np.cos(2.0 * yc)) * decay**2
    bcs = BoundarySpec.all_periodic(2)
    fill_ghosts_velocity(u, bcs)
    fill_ghosts_scalar(p, bcs)
    return u, p



def l2_error(u_num, u_exact):
    """Volume-weighted root-sum-square difference over all velocity DOFs."""
    grid = u_num.grid
    if u_exact.grid.shape != grid.shape:
        raise ValueError("fields live on different grids")
    total = 0.0
    for a, w in enumerate(velocity_weights(grid)):
        sl = grid.u_slices(a)
        diff = (
            u_num.u[a][sl].astype(np.float64) - u_exact.u[a][sl].astype(np.float64)
        )
        total += float(np.sum(w.astype(np.float64) * diff * diff))
    return math.sqrt(total)


def taylor_green_grid(n, profile="uniform", gamma=1.5, dtype=np.float64):
    if profile == "uniform":
        ax = uniform_grid(0.0, TWO_PI, n)
        ay = uniform_grid(0.0, TWO_PI, n)
    elif profile == "tanh":
        ax = tanh_grid(0.0, TWO_PI, n, gamma)
        ay = tanh_grid(0.0, TWO_PI, n, gamma)
    else:
        raise ConfigurationError(f"unknown study grid profile: {profile!r}")
    return Grid((ax, ay), (True, True), dtype=dtype)


def run_taylor_green(
    n,
    dtype=np.float64,
    solver="spectral",
    method="ssp33",
    profile="uniform",
    gamma=1.5,
    nu=2e-3,
    t_final=1.0,
    dt_factor=0.2,
):
    """March the vortex to ``t_final`` and return the velocity error."""
    grid = taylor_green_grid(n, profile=profile, gamma=gamma, dtype=dtype)
    bcs = BoundarySpec.all_periodic(2)
    setup = Setup(grid, bcs, nu=nu, solver=solver, method=method)
    u0, _ = taylor_green(grid, nu, 0.0)
    h_min = min(float(np.min(ax.widths)) for ax in grid.axes)
    dt = dt_factor * h_min
    state = simulate(setup, t_final, dt=dt, u0=u0)
    u_exact, _ = taylor_green(grid, nu, t_final)
    return l2_error(state.u, u_exact)


def convergence_study(
    ns,
    dtype=np.float64,
    solver="spectral",
    method="ssp33",
    profile="uniform",
    gamma=1.5,
    nu=2e-3,
    t_final=1.0,
    dt_factor=0.2,
    check_dt=False,
):
    """Error-versus-resolution table with observed orders.

    The time step scales with the finest volume width, so the cubic
    temporal error shrinks one power faster than the quadratic spatial
    error; ``check_dt`` verifies directly (on each requested resolution)
    that halving the step moves the error by less than one percent.
    """
    ns = list(ns)
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("resolutions must be increasing")
    rows = []
    prev = None
    for n in ns:
        err = run_taylor_green(
            n, dtype=dtype, solver=solver, method=method, profile=profile,
            gamma=gamma, nu=nu, t_final=t_final, dt_factor=dt_factor,
        )
        if check_dt:
            err_half = run_taylor_green(
                n, dtype=dtype, solver=solver, method=method, profile=profile,
                gamma=gamma, nu=nu, t_final=t_final, dt_factor=0.5 * dt_factor,
            )
            denom = max(abs(err_half), 1e-300)
            if abs(err - err_half) / denom > 0.01:
                raise ConfigurationError(
                    f"temporal error not negligible at n={n}: "
                    f"{err:.3e} vs {err_half:.3e} with half step"
                )
        order = math.log2(prev / err) if prev is not None and err > 0 else math.nan
        rows.append({"n": n, "error": err, "order": order})
        prev = err
    return rows


def fd_vcurve(h_list=None, dtype=np.float64, n_samples=16):
    """Forward and centered difference errors of d(sin)/dx versus spacing.

    Everything inside the stencil is evaluated in the requested float
    format; the error is measured in double against the exact cosine.
    """
    if h_list is None:
        h_list = np.logspace(-12.0, 0.0, 193)
    h_list = np.asarray(h_list, dtype=np.float64)
    if h_list.size >= 2 and h_list[-1] / h_list[0] < 1e8:
        raise ValueError("spacings must span at least eight decades")
    dt = np.dtype(dtype)
    xs = (0.5 + TWO_PI * np.arange(n_samples) / n_samples).astype(dt)
    exact = np.cos(xs.astype(np.float64))
    rows = []
    for h64 in h_list:
        h = dt.type(h64)
        if h == 0:
            # spacing underflowed in this format; the stencil is undefined
            rows.append({"h": float(h64), "err_order1": math.inf, "err_order2": math.inf})
            continue
        f0 = np.sin(xs)
        fp = np.sin((xs + h).astype(dt))
        fm = np.sin((xs - h).astype(dt))
        d1 = (fp - f0) / h
        d2 = (fp - fm) / (dt.type(2.0) * h)
        e1 = float(np.mean(np.abs(d1.astype(np.float64) - exact)))
        e2 = float(np.mean(np.abs(d2.astype(np.float64) - exact)))
        rows.append({"h": float(h64), "err_order1": e1, "err_order2": e2})
    return rows


def vcurve_argmin(rows, key):
    best = min(rows, key=lambda r: r[key])
    return best["h"]


def channel_grid(nx, ny, nz, gamma=2.0, y_profile="tanh", dtype=np.float64,
                 lx=4.0 * math.pi, ly=2.0, lz=4.0 * math.pi / 3.0):
    ax = uniform_grid(0.0, lx, nx)
    if y_profile == "tanh":
        ay = tanh_grid(0.0, ly, ny, gamma)
    elif y_profile == "uniform":
        ay = uniform_grid(0.0, ly, ny)
    else:
        raise ConfigurationError(f"unknown wall-normal profile: {y_profile!r}")
    az = uniform_grid(0.0, lz, nz)
    return Grid((ax, ay, az), (True, False, True), dtype=dtype)


def channel_ic(grid, nu, force_x=1.0, perturbation=0.1, seed=0):
    """Laminar force-balance profile with a deterministic seeded
    sinusoidal disturbance (projected divergence-free by the first step).

    The disturbance amplitude is ``perturbation`` friction velocities
    (u_tau = sqrt(f * H) for the canonical forcing), the scale at which
    wall turbulence is usually seeded; plane means of every mode vanish
    identically, so no mean cross-flow is injected.
    """
    rng = np.random.default_rng(seed)
    lx = grid.axes[0].b - grid.axes[0].a
    ly = grid.axes[1].b - grid.axes[1].a
    lz = grid.axes[2].b - grid.axes[2].a
    scale = force_x / (2.0 * nu)
    u_tau_ref = math.sqrt(abs(force_x) * ly / 2.0)
    u = VelocityField(grid)
    for a in range(3):
        x = grid.broadcast(grid.face_coords(a)[0], 0)
        y = grid.broadcast(grid.face_coords(a)[1], 1)
        z = grid.broadcast(grid.face_coords(a)[2], 2)
        shape_y = y * (ly - y) * (4.0 / (ly * ly))
        base = scale * y * (ly - y) if a == 0 else 0.0
        wob = np.zeros(grid.ext_shape, dtype=grid.dtype)
        for _ in range(3):
            kx = rng.integers(1, 4)
            kz = rng.integers(1, 4)
            phx = rng.uniform(0, TWO_PI)
            phz = rng.uniform(0, TWO_PI)
            amp = rng.uniform(0.5, 1.0)
            wob += amp * np.sin(TWO_PI * kx * x / lx + phx) * np.sin(
                TWO_PI * kz * z / lz + phz
            )
        u.u[a][...] = base + perturbation * u_tau_ref * shape_y * wob
    return u


def channel_setup(
    nx,
    ny,
    nz,
    gamma=2.0,
    nu=1.0 / 180.0,
    force=(1.0, 0.0, 0.0),
    y_profile="tanh",
    dtype=np.float64,
    solver="direct",
    method="ssp33",
    closure=None,
    seed=0,
    perturbation=0.1,
    cfl_conv=0.85,
    cfl_diff=0.85,
    dt_max=0.05,
):
    """Pressure-driven channel: periodic x/z, no-slip walls in y."""
    grid = channel_grid(nx, ny, nz, gamma=gamma, y_profile=y_profile, dtype=dtype)
    bcs = BoundarySpec.channel(dim=3, wall_axis=1)
    setup = Setup(
        grid,
        bcs,
        nu=nu,
        force=force,
        closure=closure,
        solver=solver,
        method=method,
        cfl_conv=cfl_conv,
        cfl_diff=cfl_diff,
        dt_max=dt_max,
        ic=lambda g: channel_ic(g, nu, force_x=force[0], perturbation=perturbation, seed=seed),
    )
    return setup


def poiseuille_profile(y, force_x, nu, ly=2.0):
    """Steady laminar balance of a constant force against viscosity."""
    return force_x * y * (ly - y) / (2.0 * nu)
